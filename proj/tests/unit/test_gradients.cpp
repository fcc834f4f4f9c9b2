#include <gtest/gtest.h>

#include "gradcases.hpp"

using namespace nluaug;
using nluaug::testkit::checkGradients;
using nluaug::testkit::GradCase;
using nluaug::testkit::graphLoss;

namespace {

class Gradient : public ::testing::TestWithParam<GradCase> {};

}  // namespace

TEST_P(Gradient, MatchesCentralDifferences) {
  const auto res = GetParam().run();
  EXPECT_GE(res.checked, 20u);
  EXPECT_LT(res.worstRelError, 1e-4) << res.worstCoordinate;
}

INSTANTIATE_TEST_SUITE_P(All, Gradient, ::testing::ValuesIn(nluaug::testkit::gradientCases()),
                         [](const auto& info) { return info.param.name; });

TEST(GradCheckHarness, DetectsAWrongGradient) {
  ParameterSet ps;
  auto& a = ps.add("a", Tensor::matrix(1, 3, 0.5));
  // Backward deliberately doubles the true gradient.
  auto wrong = [&](Graph& g) {
    Var x = g.param(a);
    Tensor v = Tensor::scalar(x.value()[0] * x.value()[0]);
    return g.push(std::move(v), {x.id}, [id = x.id](Graph& gr, int self) {
      gr.gradRef(id)[0] += 4.0 * gr.value(id)[0] * gr.gradRef(self).item();
    });
  };
  Rng rng(1);
  auto res = checkGradients(ps, graphLoss(wrong), rng, 20);
  EXPECT_GT(res.worstRelError, 0.1);
}
