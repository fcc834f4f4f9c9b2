#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace nluaug::testkit {

/// A self-contained finite-difference check of one op or model loss.
struct GradCase {
  std::string name;
  std::function<GradCheckResult()> run;
};

/// Every autodiff op plus the model-level losses (generator policy-gradient
/// surrogate, both discriminators, joint NLU model).
std::vector<GradCase> gradientCases();

}  // namespace nluaug::testkit
