#include <fstream>
#include <string>

#include "treat/data.hpp"

namespace treat {

namespace {

constexpr const char* kFormat = "treat-dataset";

template <class J>
void require_fields(const J& j, std::initializer_list<const char*> allowed, std::size_t line,
                    const char* what) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw DatasetError(std::string("unknown ") + what + " field '" + item.key() + "'", line);
  }
}

}  // namespace

nlohmann::ordered_json record_to_json(const DatasetRecord& record) {
  const Trajectory& t = record.trajectory;
  nlohmann::ordered_json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["split"] = record.split;
  j["index"] = record.index;
  j["system"] = std::string(to_string(t.system.kind));
  j["params"] = to_json(t.system);
  j["seed"] = t.seed;
  j["stream"] = t.stream;
  j["rng"] = std::string(kRngName);
  j["layout"] = {{"n_agents", t.system.n_agents}, {"dq", t.system.dq()}, {"dp", t.system.dp()}};
  j["scale"] = t.scale;
  j["times"] = t.times;
  auto states = nlohmann::ordered_json::array();
  for (const auto& s : t.states) {
    states.push_back(std::vector<double>(s.values().begin(), s.values().end()));
  }
  j["states"] = std::move(states);
  j["observations"] = {{"condition", record.plan.condition},
                       {"target_begin", record.plan.target_begin},
                       {"target_end", record.plan.target_end}};
  return j;
}

DatasetRecord record_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw DatasetError("record is not a JSON object", line);
  require_fields(j,
                 {"schema_version", "split", "index", "system", "params", "seed", "stream", "rng",
                  "layout", "scale", "times", "states", "observations"},
                 line, "record");
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kDatasetSchemaVersion) {
      throw DatasetError("schema_version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kDatasetSchemaVersion) + ")",
                         line);
    }
    DatasetRecord rec;
    rec.split = j.at("split").get<std::string>();
    if (rec.split != "train" && rec.split != "test") {
      throw DatasetError("split must be 'train' or 'test'", line);
    }
    rec.index = j.at("index").get<std::size_t>();
    Trajectory& t = rec.trajectory;
    t.system = system_spec_from_json(j.at("params"));
    if (j.at("system").get<std::string>() != to_string(t.system.kind)) {
      throw DatasetError("system name does not match params.kind", line);
    }
    t.seed = j.at("seed").get<std::uint64_t>();
    t.stream = j.at("stream").get<std::uint64_t>();
    t.scale = j.at("scale").get<double>();
    t.times = j.at("times").get<std::vector<double>>();
    const auto& layout = j.at("layout");
    const auto n = layout.at("n_agents").get<std::size_t>();
    const auto dq = layout.at("dq").get<std::size_t>();
    const auto dp = layout.at("dp").get<std::size_t>();
    for (const auto& row : j.at("states")) {
      t.states.emplace_back(n, dq, dp, row.get<std::vector<double>>());
    }
    t.validate();
    const auto& obs = j.at("observations");
    rec.plan.condition = obs.at("condition").get<AgentIndexSets>();
    rec.plan.target_begin = obs.at("target_begin").get<std::size_t>();
    rec.plan.target_end = obs.at("target_end").get<std::size_t>();
    if (rec.plan.condition.size() != n || rec.plan.target_end > t.size() ||
        rec.plan.target_begin >= rec.plan.target_end) {
      throw DatasetError("observation plan inconsistent with trajectory", line);
    }
    for (const auto& agent : rec.plan.condition) {
      for (std::size_t k = 0; k < agent.size(); ++k) {
        if (agent[k] >= rec.plan.target_begin || (k > 0 && agent[k] <= agent[k - 1])) {
          throw DatasetError("condition indices must be increasing and precede the targets", line);
        }
      }
    }
    return rec;
  } catch (const DatasetError& e) {
    if (e.line() != 0) throw;
    throw DatasetError(e.what(), line);
  } catch (const Error& e) {
    throw DatasetError(e.what(), line);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed record: ") + e.what(), line);
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  nlohmann::ordered_json header;
  header["schema_version"] = kDatasetSchemaVersion;
  header["format"] = kFormat;
  header["records"] = dataset.records.size();
  header["meta"] = dataset.meta;
  out << header.dump() << '\n';
  for (const auto& r : dataset.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  std::size_t expected = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!have_header) {
      if (!j.is_object() || j.value("format", std::string()) != kFormat) {
        throw DatasetError("missing dataset header", line);
      }
      require_fields(j, {"schema_version", "format", "records", "meta"}, line, "header");
      if (j.value("schema_version", -1) != kDatasetSchemaVersion) {
        throw DatasetError("unsupported schema_version in header", line);
      }
      expected = j.value("records", std::size_t{0});
      ds.meta = nlohmann::ordered_json::parse(text).value("meta", nlohmann::ordered_json::object());
      have_header = true;
      continue;
    }
    ds.records.push_back(record_from_json(j, line));
  }
  if (!have_header) throw DatasetError("empty file, no dataset header", line);
  if (ds.records.size() != expected) {
    throw DatasetError("header announces " + std::to_string(expected) + " records, found " +
                           std::to_string(ds.records.size()),
                       line);
  }
  return ds;
}

}  // namespace treat
