#include "splinestroke/grad/checkpoint.hpp"

#include <fstream>

namespace splinestroke::grad {

nlohmann::json to_json(const NamedTensors& tensors) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, t] : tensors) {
    const Buffer& v = t.value();
    doc[name] = {{"shape", t.shape()}, {"data", std::vector<double>(v.data(), v.data() + v.size())}};
  }
  return doc;
}

NamedTensors from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw GradError("checkpoint: expected a JSON object of named tensors");
  NamedTensors out;
  for (const auto& [name, entry] : doc.items()) {
    if (!entry.contains("shape") || !entry.contains("data")) {
      throw GradError("checkpoint: tensor '" + name + "' lacks shape or data");
    }
    auto shape = entry.at("shape").get<Shape>();
    auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != numel(shape)) {
      throw GradError("checkpoint: tensor '" + name + "' has " + std::to_string(data.size()) +
                      " values for shape " + to_string(shape));
    }
    out.emplace(name, Tensor::from(std::move(shape), std::move(data)));
  }
  return out;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream os(path);
  if (!os) throw GradError("checkpoint: cannot open " + path.string() + " for writing");
  os << to_json(tensors).dump() << '\n';
  if (!os) throw GradError("checkpoint: write failed for " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw GradError("checkpoint: cannot open " + path.string());
  return from_json(nlohmann::json::parse(is));
}

}  // namespace splinestroke::grad
