#include "nluaug/params.hpp"

#include <bit>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nluaug/error.hpp"
#include "nluaug/rng.hpp"

namespace nluaug {

Parameter& ParameterSet::add(const std::string& name, Tensor init) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(init.shape(), 0.0);
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParameterSet::get(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + name + "'");
}

const Parameter& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterSet::zeroGrad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

std::size_t ParameterSet::scalarCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::uint64_t ParameterSet::fingerprint() const {
  std::uint64_t h = fnv1a("params");
  for (const auto& p : params_) {
    h = fnv1a(p->name, h);
    for (double v : p->value.data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      h = fnv1a(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
    }
  }
  return h;
}

void ParameterSet::copyValuesFrom(const ParameterSet& other) {
  if (other.size() != size()) throw ConfigError("parameter sets differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = *other.params_[i];
    auto& dst = *params_[i];
    if (src.name != dst.name || !src.value.sameShape(dst.value))
      throw ConfigError("parameter mismatch copying '" + src.name + "'");
    dst.value = src.value;
  }
}

void ParameterSet::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  auto& arr = j["parameters"] = nlohmann::json::array();
  for (const auto& p : params_) {
    arr.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"data", p->value.storage()}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

void ParameterSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat)
    throw DataError("checkpoint " + path.string() + ": unknown format");
  if (j.value("version", 0) != kCheckpointVersion)
    throw DataError("checkpoint " + path.string() + ": unsupported version");
  for (const auto& entry : j.at("parameters")) {
    const auto name = entry.at("name").get<std::string>();
    Parameter* p = find(name);
    if (p == nullptr) throw DataError("checkpoint parameter '" + name + "' not in model");
    Tensor t(entry.at("shape").get<std::vector<std::size_t>>(),
             entry.at("data").get<std::vector<double>>());
    if (t.shape() != p->value.shape())
      throw DataError("checkpoint parameter '" + name + "' has shape " + shapeString(t) +
                      ", model expects " + shapeString(p->value));
    p->value = std::move(t);
  }
}

}  // namespace nluaug
