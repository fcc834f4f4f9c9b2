#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "nluaug/tensor.hpp"

namespace nluaug {

/// Trainable tensor with its gradient slot. A frozen parameter never
/// receives gradient and is skipped by optimisers.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;
};

/// Owning, name-addressed parameter store. Parameter addresses stay stable
/// for the lifetime of the set (including across moves of the set).
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter& add(const std::string& name, Tensor init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  Parameter* find(const std::string& name);

  std::size_t size() const { return params_.size(); }
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zeroGrad();
  std::size_t scalarCount() const;
  /// Hash over names and bit patterns of every value.
  std::uint64_t fingerprint() const;

  /// Copy values from another set with identical names and shapes.
  void copyValuesFrom(const ParameterSet& other);

  /// Versioned JSON container: {"format","version","parameters":[{name,shape,data}]}.
  void save(const std::filesystem::path& path) const;
  /// Loads values into existing parameters; names and shapes must match.
  void load(const std::filesystem::path& path);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

inline constexpr const char* kCheckpointFormat = "nluaug-parameters";
inline constexpr int kCheckpointVersion = 1;

}  // namespace nluaug
