#include "treat/model.hpp"

#include <algorithm>
#include <cmath>

#include "treat/rng.hpp"

namespace treat {

using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("model input/output dims must be >= 1");
  if (d_hidden == 0 || d_hidden % 2 != 0) throw ConfigError("d_hidden must be even and >= 2");
  if (d_enc == 0) throw ConfigError("d_enc must be >= 1");
  if (ode_hidden == 0) throw ConfigError("ode_hidden must be >= 1");
  if (substeps == 0) throw ConfigError("substeps must be >= 1");
}

nlohmann::ordered_json to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["input_dim"] = cfg.input_dim;
  j["output_dim"] = cfg.output_dim;
  j["d_hidden"] = cfg.d_hidden;
  j["d_enc"] = cfg.d_enc;
  j["d_aug"] = cfg.d_aug;
  j["attention_layers"] = cfg.attention_layers;
  j["spatial_round"] = cfg.spatial_round;
  j["ode_hidden"] = cfg.ode_hidden;
  j["decoder_hidden"] = cfg.decoder_hidden;
  j["scheme"] = std::string(to_string(cfg.scheme));
  j["substeps"] = cfg.substeps;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  static const char* const kKnown[] = {"input_dim",    "output_dim",       "d_hidden",
                                       "d_enc",        "d_aug",            "attention_layers",
                                       "spatial_round", "ode_hidden",      "decoder_hidden",
                                       "scheme",       "substeps"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown model field '" + item.key() + "'");
  }
  try {
    ModelConfig cfg;
    cfg.input_dim = j.value("input_dim", cfg.input_dim);
    cfg.output_dim = j.value("output_dim", cfg.output_dim);
    cfg.d_hidden = j.value("d_hidden", cfg.d_hidden);
    cfg.d_enc = j.value("d_enc", cfg.d_enc);
    cfg.d_aug = j.value("d_aug", cfg.d_aug);
    cfg.attention_layers = j.value("attention_layers", cfg.attention_layers);
    cfg.spatial_round = j.value("spatial_round", cfg.spatial_round);
    cfg.ode_hidden = j.value("ode_hidden", cfg.ode_hidden);
    cfg.decoder_hidden = j.value("decoder_hidden", cfg.decoder_hidden);
    if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
    cfg.substeps = j.value("substeps", cfg.substeps);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Parameters

void ModelParams::add(std::string name, Tensor value) {
  for (const auto& e : entries_) {
    if (e.name == name) throw ConfigError("duplicate parameter '" + name + "'");
  }
  entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ModelParams::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (entries_[k].name == name) return k;
  }
  throw ConfigError("no parameter named '" + name + "'");
}

const Tensor& ModelParams::get(const std::string& name) const {
  return entries_[index_of(name)].value;
}

Tensor& ModelParams::get(const std::string& name) { return entries_[index_of(name)].value; }

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& e : entries_) {
    if (!e.value.all_finite()) return false;
  }
  return true;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t k = 0; k < a.entries_.size(); ++k) {
    if (a.entries_[k].name != b.entries_[k].name || a.entries_[k].value != b.entries_[k].value) {
      return false;
    }
  }
  return true;
}

Var BoundParams::operator[](const std::string& name) const {
  return vars.at(params->index_of(name));
}

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  BoundParams bp;
  bp.params = &params;
  bp.vars.reserve(params.size());
  for (const auto& e : params.entries()) {
    bp.vars.push_back(trainable ? tape.variable(e.value) : tape.constant(e.value));
  }
  return bp;
}

namespace {

struct Layout {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  bool bias;
};

std::vector<Layout> layout_of(const ModelConfig& cfg) {
  const std::size_t dh = cfg.d_hidden;
  const std::size_t dz = cfg.latent_dim();
  std::vector<Layout> out;
  auto linear = [&](const std::string& prefix, std::size_t in, std::size_t outd) {
    out.push_back({prefix + ".W", in, outd, false});
    out.push_back({prefix + ".b", 1, outd, true});
  };
  linear("enc.embed", cfg.input_dim, dh);
  for (std::size_t l = 0; l < cfg.attention_layers; ++l) {
    const std::string p = "enc.attn" + std::to_string(l);
    out.push_back({p + ".Wq", dh, dh, false});
    out.push_back({p + ".Wk", dh, dh, false});
    out.push_back({p + ".Wv", dh, dh, false});
  }
  out.push_back({"enc.pool.Wa", dh, dh, false});
  linear("enc.out", dh, cfg.d_enc);
  if (cfg.spatial_round) linear("enc.spatial", 2 * cfg.d_enc, cfg.d_enc);
  linear("ode.msg", 2 * dz, cfg.ode_hidden);
  linear("ode.upd1", dz + cfg.ode_hidden, cfg.ode_hidden);
  linear("ode.upd2", cfg.ode_hidden, dz);
  if (cfg.decoder_hidden > 0) {
    linear("dec.l1", dz, cfg.decoder_hidden);
    linear("dec.l2", cfg.decoder_hidden, cfg.output_dim);
  } else {
    linear("dec", dz, cfg.output_dim);
  }
  return out;
}

}  // namespace

ModelParams zero_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  for (const auto& l : layout_of(cfg)) p.add(l.name, Tensor({l.rows, l.cols}));
  return p;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed, 0x6d6f64656cull);
  ModelParams p;
  for (const auto& l : layout_of(cfg)) {
    Tensor t({l.rows, l.cols});
    if (!l.bias) {
      const double a = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
      for (double& v : t.data) v = rng.uniform(-a, a);
    }
    p.add(l.name, std::move(t));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Encoder

std::vector<double> temporal_encoding(double dt, std::size_t d) {
  if (d % 2 != 0) throw ConfigError("temporal encoding dimension must be even");
  std::vector<double> out(d);
  for (std::size_t i = 0; 2 * i < d; ++i) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
    out[2 * i] = std::sin(dt / freq);
    out[2 * i + 1] = std::cos(dt / freq);
  }
  return out;
}

EdgeList edges_for(const InteractionGraph& graph) {
  EdgeList e;
  e.n_rows = graph.size();
  if (graph.size() == 1) {
    e.src.push_back(0);
    e.dst.push_back(0);
    return e;
  }
  for (std::size_t dst = 0; dst < graph.size(); ++dst) {
    for (std::size_t src : graph.neighbors(dst)) {
      e.src.push_back(src);
      e.dst.push_back(dst);
    }
  }
  return e;
}

EdgeList batch_edges(const std::vector<const ObservationSet*>& batch) {
  EdgeList all;
  for (const auto* obs : batch) {
    const EdgeList e = edges_for(obs->graph.size() == obs->n_agents
                                     ? obs->graph
                                     : InteractionGraph(obs->n_agents));
    for (std::size_t k = 0; k < e.src.size(); ++k) {
      all.src.push_back(all.n_rows + e.src[k]);
      all.dst.push_back(all.n_rows + e.dst[k]);
    }
    all.n_rows += obs->n_agents;
  }
  return all;
}

namespace {

Var linear(const BoundParams& bp, const std::string& prefix, Var x) {
  return ad::add_row(ad::matmul(x, bp[prefix + ".W"]), bp[prefix + ".b"]);
}

}  // namespace

Var encode_initial_states(ad::Tape& tape, const BoundParams& bp, const ModelConfig& cfg,
                          const std::vector<const ObservationSet*>& batch) {
  if (batch.empty()) throw ConfigError("encode: empty batch");
  const std::size_t dh = cfg.d_hidden;

  // Flatten every agent's observations into one matrix, remembering the
  // row range of each (sample, agent) sequence.
  std::vector<double> x_data;
  std::vector<double> te_data;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t row = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const ObservationSet& obs = *batch[b];
    if (obs.feature_dim != cfg.input_dim) {
      throw ArtifactMismatchError("observation features (" + std::to_string(obs.feature_dim) +
                                  ") do not match model input_dim (" +
                                  std::to_string(cfg.input_dim) + ")");
    }
    const double t0 = obs.t0();
    for (std::size_t i = 0; i < obs.n_agents; ++i) {
      const auto& agent = obs.condition.at(i);
      if (agent.times.empty()) {
        throw ConfigError("encode: agent " + std::to_string(i) + " of batch item " +
                          std::to_string(b) + " has no observations");
      }
      ranges.emplace_back(row, row + agent.times.size());
      for (std::size_t k = 0; k < agent.times.size(); ++k) {
        x_data.insert(x_data.end(), agent.features[k].begin(), agent.features[k].end());
        const auto te = temporal_encoding(agent.times[k] - t0, dh);
        te_data.insert(te_data.end(), te.begin(), te.end());
        ++row;
      }
    }
  }
  const Var x = tape.constant(Tensor({row, cfg.input_dim}, std::move(x_data)));
  const Var te = tape.constant(Tensor({row, dh}, std::move(te_data)));

  Var h = ad::tanh(linear(bp, "enc.embed", x));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg.attention_layers; ++l) {
    const std::string p = "enc.attn" + std::to_string(l);
    const Var hh = h + te;
    const Var q = ad::matmul(hh, bp[p + ".Wq"]);
    const Var k = ad::matmul(hh, bp[p + ".Wk"]);
    const Var v = ad::matmul(hh, bp[p + ".Wv"]);
    std::vector<Var> parts;
    parts.reserve(ranges.size());
    for (const auto& [begin, end] : ranges) {
      const Var qs = ad::slice_rows(q, begin, end);
      const Var ks = ad::slice_rows(k, begin, end);
      const Var vs = ad::slice_rows(v, begin, end);
      const Var attn = ad::softmax_rows(ad::scale(ad::matmul(qs, ad::transpose(ks)), inv_sqrt_d));
      parts.push_back(ad::matmul(attn, vs));
    }
    h = h + ad::relu(ad::concat_rows(parts));
  }

  const Var hh = h + te;
  const Var wa = bp["enc.pool.Wa"];
  std::vector<Var> pooled;
  pooled.reserve(ranges.size());
  for (const auto& [begin, end] : ranges) {
    const Var hs = ad::slice_rows(hh, begin, end);
    const Var a = ad::tanh(ad::matmul(ad::mean_rows(hs), wa));
    const Var gate = ad::sigmoid(ad::scale(ad::matmul(hs, ad::transpose(a)), inv_sqrt_d));
    pooled.push_back(ad::mean_rows(ad::mul_col(hs, gate)));
  }
  Var z = linear(bp, "enc.out", ad::concat_rows(pooled));

  if (cfg.spatial_round) {
    const EdgeList edges = batch_edges(batch);
    const Var incoming =
        ad::scatter_add_rows(ad::gather_rows(z, edges.src), edges.dst, edges.n_rows);
    z = z + ad::tanh(linear(bp, "enc.spatial", ad::concat_cols({z, incoming})));
  }
  if (cfg.d_aug == 0) return z;
  const Var aug = tape.constant(Tensor({z.rows(), cfg.d_aug}));
  return ad::concat_cols({z, aug});
}

// ---------------------------------------------------------------------------
// ODE function, decoder, rollouts

Var gnn_ode_func(const BoundParams& bp, const ModelConfig& cfg, Var z, const EdgeList& edges) {
  if (z.cols() != cfg.latent_dim()) {
    throw ShapeError("gnn_ode_func: latent width " + std::to_string(z.cols()) + ", expected " +
                     std::to_string(cfg.latent_dim()));
  }
  Var agg;
  if (edges.src.empty()) {
    agg = z.tape->constant(Tensor({z.rows(), cfg.ode_hidden}));
  } else {
    const Var pair = ad::concat_cols({ad::gather_rows(z, edges.dst), ad::gather_rows(z, edges.src)});
    const Var msg = ad::tanh(linear(bp, "ode.msg", pair));
    agg = ad::scatter_add_rows(msg, edges.dst, z.rows());
  }
  const Var hidden = ad::tanh(linear(bp, "ode.upd1", ad::concat_cols({z, agg})));
  return linear(bp, "ode.upd2", hidden);
}

Var decode(const BoundParams& bp, const ModelConfig& cfg, Var z) {
  if (cfg.decoder_hidden > 0) {
    return linear(bp, "dec.l2", ad::tanh(linear(bp, "dec.l1", z)));
  }
  return linear(bp, "dec", z);
}

std::vector<Var> rollout(Var z0, const std::vector<double>& intervals, Scheme scheme,
                         std::size_t substeps, const LatentField& field, double sign) {
  if (substeps == 0) throw ConfigError("rollout: substeps must be >= 1");
  auto deriv = [&](const Var& z, double) {
    const Var d = field(z);
    return sign < 0.0 ? ad::neg(d) : d;
  };
  std::vector<Var> out;
  out.reserve(intervals.size() + 1);
  out.push_back(z0);
  Var z = z0;
  double t = 0.0;
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    if (!(intervals[k] > 0.0)) throw ConfigError("rollout: intervals must be positive");
    z = step_interval(scheme, deriv, z, t, intervals[k], substeps);
    t += intervals[k];
    if (!z.value().all_finite()) throw DivergenceError("rollout produced a non-finite latent", k);
    out.push_back(z);
  }
  return out;
}

std::vector<double> intervals_of(const std::vector<double>& times) {
  std::vector<double> out;
  for (std::size_t k = 1; k < times.size(); ++k) out.push_back(times[k] - times[k - 1]);
  return out;
}

std::vector<Var> rollout_forward(const BoundParams& bp, const ModelConfig& cfg, Var z0,
                                 const std::vector<double>& target_times, const EdgeList& edges) {
  const LatentField g = [&](Var z) { return gnn_ode_func(bp, cfg, z, edges); };
  return rollout(z0, intervals_of(target_times), cfg.scheme, cfg.substeps, g, 1.0);
}

std::vector<Var> rollout_reverse(const BoundParams& bp, const ModelConfig& cfg, Var z_fwd_end,
                                 const std::vector<double>& target_times, const EdgeList& edges) {
  std::vector<double> rev = intervals_of(target_times);
  std::reverse(rev.begin(), rev.end());
  const LatentField g = [&](Var z) { return gnn_ode_func(bp, cfg, z, edges); };
  return rollout(z_fwd_end, rev, cfg.scheme, cfg.substeps, g, -1.0);
}

std::vector<double> batch_target_times(const std::vector<const ObservationSet*>& batch) {
  if (batch.empty()) throw ConfigError("empty batch");
  const std::vector<double> times = batch[0]->target_times;
  if (times.empty()) throw ConfigError("sample has no prediction targets");
  const auto ref = intervals_of(times);
  for (const auto* obs : batch) {
    const auto iv = intervals_of(obs->target_times);
    if (iv.size() != ref.size()) throw ConfigError("batch samples have different target counts");
    for (std::size_t k = 0; k < iv.size(); ++k) {
      if (std::abs(iv[k] - ref[k]) > 1e-9 * std::max(1.0, std::abs(ref[k]))) {
        throw ConfigError("batch samples have different target spacing");
      }
    }
  }
  return times;
}

std::vector<Var> batch_targets(ad::Tape& tape, const std::vector<const ObservationSet*>& batch) {
  const std::size_t k_count = batch.at(0)->n_targets();
  std::size_t rows = 0;
  for (const auto* obs : batch) rows += obs->n_agents;
  const std::size_t f = batch[0]->feature_dim;
  std::vector<Var> out;
  out.reserve(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    std::vector<double> data;
    data.reserve(rows * f);
    for (const auto* obs : batch) {
      if (obs->feature_dim != f) throw ConfigError("batch samples have different feature dims");
      data.insert(data.end(), obs->targets.at(k).begin(), obs->targets.at(k).end());
    }
    out.push_back(tape.constant(Tensor({rows, f}, std::move(data))));
  }
  return out;
}

}  // namespace treat
