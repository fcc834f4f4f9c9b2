#include "nluaug/optimizer.hpp"

#include <cmath>

#include "nluaug/error.hpp"

namespace nluaug {

double Optimizer::step(ParameterSet& params) {
  double sq = 0.0;
  for (Parameter* p : params.all()) {
    if (p->frozen) continue;
    for (double g : p->grad.data()) {
      if (!std::isfinite(g))
        throw NumericalError("non-finite gradient in parameter '" + p->name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double clip =
      (config_.gradClipNorm > 0.0 && norm > config_.gradClipNorm) ? config_.gradClipNorm / norm : 1.0;

  ++t_;
  const double lr = config_.learningRate;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Parameter* p : params.all()) {
    if (p->frozen) {
      p->grad.fill(0.0);
      continue;
    }
    auto& value = p->value.storage();
    auto& grad = p->grad.storage();
    if (config_.kind == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * clip * grad[i];
    } else {
      auto& mom = moments_[p->name];
      if (mom.m.size() != value.size()) {
        mom.m.assign(value.size(), 0.0);
        mom.v.assign(value.size(), 0.0);
      }
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = clip * grad[i];
        mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g;
        mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g * g;
        const double mhat = mom.m[i] / bc1;
        const double vhat = mom.v[i] / bc2;
        value[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
      }
    }
    for (double v : value)
      if (!std::isfinite(v)) throw NumericalError("parameter '" + p->name + "' became non-finite");
    p->grad.fill(0.0);
  }
  return norm;
}

}  // namespace nluaug
