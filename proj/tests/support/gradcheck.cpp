#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace nluaug::testkit {

GradCheckResult checkGradients(ParameterSet& params, const LossFn& loss, Rng& rng, std::size_t coords,
                               double h) {
  std::vector<std::pair<Parameter*, std::size_t>> pool;
  for (Parameter* p : params.all())
    if (!p->frozen)
      for (std::size_t i = 0; i < p->value.size(); ++i) pool.emplace_back(p, i);

  params.zeroGrad();
  loss(true);
  GradCheckResult r;
  for (std::size_t k = 0; k < coords && !pool.empty(); ++k) {
    auto [p, i] = pool[rng.index(pool.size())];
    const double analytic = p->grad[i];
    const double saved = p->value[i];
    p->value[i] = saved + h;
    const double up = loss(false);
    p->value[i] = saved - h;
    const double down = loss(false);
    p->value[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    ++r.checked;
    if (rel >= r.worstRelError) {
      r.worstRelError = rel;
      r.worstCoordinate = p->name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic) +
                          " numeric=" + std::to_string(numeric);
    }
  }
  return r;
}

LossFn graphLoss(std::function<Var(Graph&)> build, bool training, std::uint64_t seed) {
  return [build = std::move(build), training, seed](bool accumulate) {
    Rng rng(seed);
    Graph g(training, &rng);
    Var l = build(g);
    if (accumulate) g.backward(l);
    return l.value().item();
  };
}

}  // namespace nluaug::testkit
