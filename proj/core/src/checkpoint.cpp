#include <fstream>

#include "treat/model.hpp"

namespace treat {

namespace {

constexpr const char* kCheckpointFormat = "treat-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params, const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j;
  j["schema_version"] = kCheckpointVersion;
  j["format"] = kCheckpointFormat;
  j["config"] = to_json(cfg);
  j["extra"] = extra.is_null() ? nlohmann::ordered_json::object() : extra;
  auto list = nlohmann::ordered_json::array();
  for (const auto& e : params.entries()) {
    nlohmann::ordered_json p;
    p["name"] = e.name;
    p["shape"] = e.value.shape;
    p["data"] = e.value.data;
    list.push_back(std::move(p));
  }
  j["params"] = std::move(list);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactMismatchError("checkpoint is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.value("format", std::string()) != kCheckpointFormat) {
      throw ArtifactMismatchError("'" + path.string() + "' is not a checkpoint");
    }
    if (j.value("schema_version", -1) != kCheckpointVersion) {
      throw ArtifactMismatchError("unsupported checkpoint schema_version");
    }
    Checkpoint ck;
    try {
      ck.config = model_config_from_json(j.at("config"));
    } catch (const ConfigError& e) {
      throw ArtifactMismatchError(std::string("checkpoint config: ") + e.what());
    }
    ck.extra = j.value("extra", nlohmann::json::object());
    const ModelParams expected = zero_params(ck.config);
    const auto& list = j.at("params");
    if (list.size() != expected.size()) {
      throw ArtifactMismatchError("checkpoint has " + std::to_string(list.size()) +
                                  " parameters, config implies " +
                                  std::to_string(expected.size()));
    }
    for (std::size_t k = 0; k < list.size(); ++k) {
      const auto& want = expected.entries()[k];
      const auto name = list[k].at("name").get<std::string>();
      const auto shape = list[k].at("shape").get<std::vector<std::size_t>>();
      if (name != want.name || shape != want.value.shape) {
        throw ArtifactMismatchError("parameter " + std::to_string(k) + " is '" + name + "' " +
                                    ad::shape_string(shape) + ", expected '" + want.name + "' " +
                                    ad::shape_string(want.value.shape));
      }
      auto data = list[k].at("data").get<std::vector<double>>();
      if (data.size() != want.value.size()) {
        throw ArtifactMismatchError("parameter '" + name + "' has the wrong number of values");
      }
      ck.params.add(name, ad::Tensor(shape, std::move(data)));
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactMismatchError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace treat
