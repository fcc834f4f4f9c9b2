#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "nluaug/params.hpp"

namespace nluaug {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learningRate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global-norm clipping threshold; <= 0 disables clipping.
  double gradClipNorm = 5.0;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  const OptimizerConfig& config() const { return config_; }
  long steps() const { return t_; }

  /// Clips, applies one update to every non-frozen parameter and zeroes all
  /// gradients. Throws NumericalError naming the first non-finite gradient.
  /// Returns the pre-clipping global gradient norm.
  double step(ParameterSet& params);

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  OptimizerConfig config_;
  long t_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

}  // namespace nluaug
