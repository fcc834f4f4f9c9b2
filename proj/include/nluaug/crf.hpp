#pragma once

#include <span>
#include <string>
#include <vector>

#include "nluaug/graph.hpp"

namespace nluaug {

/// Linear-chain CRF transitions over L labels plus two boundary states:
/// row/column L is BOS and L + 1 is EOS. A path y scores
///   T[BOS, y0] + sum_t E[t, y_t] + sum_t T[y_{t-1}, y_t] + T[y_{n-1}, EOS].
struct CrfLayer {
  Parameter* transitions = nullptr;  // (L+2) x (L+2)
  std::size_t labels = 0;

  static CrfLayer create(ParameterSet& ps, const std::string& name, std::size_t labels);
  int bos() const { return static_cast<int>(labels); }
  int eos() const { return static_cast<int>(labels) + 1; }
};

double crfPathScore(const Tensor& emissions, const Tensor& transitions, std::span<const int> path);
/// Forward algorithm in log space.
double crfLogPartition(const Tensor& emissions, const Tensor& transitions);

struct ViterbiResult {
  std::vector<int> path;
  double score = 0.0;
};
ViterbiResult viterbiDecode(const Tensor& emissions, const Tensor& transitions);

/// log Z - score(gold) on the tape; the backward pass uses forward-backward
/// marginals. emissions: n x L, transitions: (L+2) x (L+2).
Var crfNegLogLikelihood(Var emissions, Var transitions, std::span<const int> gold);

}  // namespace nluaug
