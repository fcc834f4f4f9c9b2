#include "nluaug/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nluaug/error.hpp"

namespace nluaug {

namespace {

double logSumExp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

std::size_t checkShapes(const Tensor& emissions, const Tensor& transitions) {
  const std::size_t L = emissions.cols();
  if (emissions.rows() == 0) throw ShapeError("CRF needs at least one position");
  if (transitions.rows() != L + 2 || transitions.cols() != L + 2)
    throw ShapeError("CRF transitions " + shapeString(transitions) + " do not match " +
                     std::to_string(L) + " labels (expected (L+2)x(L+2))");
  return L;
}

struct Lattice {
  std::vector<std::vector<double>> alpha, beta;
  double logZ = 0.0;
};

Lattice forwardBackward(const Tensor& E, const Tensor& T) {
  const std::size_t L = checkShapes(E, T), n = E.rows();
  const std::size_t B = L, X = L + 1;
  Lattice lat;
  lat.alpha.assign(n, std::vector<double>(L));
  lat.beta.assign(n, std::vector<double>(L));
  std::vector<double> terms(L);
  for (std::size_t j = 0; j < L; ++j) lat.alpha[0][j] = T(B, j) + E(0, j);
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t i = 0; i < L; ++i) terms[i] = lat.alpha[t - 1][i] + T(i, j);
      lat.alpha[t][j] = logSumExp(terms) + E(t, j);
    }
  for (std::size_t j = 0; j < L; ++j) lat.beta[n - 1][j] = T(j, X);
  for (std::size_t t = n - 1; t-- > 0;)
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) terms[j] = T(i, j) + E(t + 1, j) + lat.beta[t + 1][j];
      lat.beta[t][i] = logSumExp(terms);
    }
  for (std::size_t j = 0; j < L; ++j) terms[j] = lat.alpha[n - 1][j] + T(j, X);
  lat.logZ = logSumExp(terms);
  return lat;
}

}  // namespace

CrfLayer CrfLayer::create(ParameterSet& ps, const std::string& name, std::size_t labels) {
  if (labels == 0) throw ConfigError("CRF needs at least one label");
  CrfLayer c;
  c.labels = labels;
  c.transitions = &ps.add(name + ".transitions", Tensor::matrix(labels + 2, labels + 2));
  return c;
}

double crfPathScore(const Tensor& E, const Tensor& T, std::span<const int> path) {
  const std::size_t L = checkShapes(E, T);
  if (path.size() != E.rows()) throw ShapeError("CRF path length does not match emissions");
  for (int y : path)
    if (y < 0 || static_cast<std::size_t>(y) >= L) throw ShapeError("CRF label out of range");
  double s = T(L, static_cast<std::size_t>(path[0]));
  for (std::size_t t = 0; t < path.size(); ++t) {
    s += E(t, static_cast<std::size_t>(path[t]));
    if (t > 0) s += T(static_cast<std::size_t>(path[t - 1]), static_cast<std::size_t>(path[t]));
  }
  return s + T(static_cast<std::size_t>(path.back()), L + 1);
}

double crfLogPartition(const Tensor& emissions, const Tensor& transitions) {
  return forwardBackward(emissions, transitions).logZ;
}

ViterbiResult viterbiDecode(const Tensor& E, const Tensor& T) {
  const std::size_t L = checkShapes(E, T), n = E.rows();
  std::vector<std::vector<double>> delta(n, std::vector<double>(L));
  std::vector<std::vector<int>> back(n, std::vector<int>(L, 0));
  for (std::size_t j = 0; j < L; ++j) delta[0][j] = T(L, j) + E(0, j);
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < L; ++i)
        if (delta[t - 1][i] + T(i, j) > delta[t - 1][best] + T(best, j)) best = i;
      delta[t][j] = delta[t - 1][best] + T(best, j) + E(t, j);
      back[t][j] = static_cast<int>(best);
    }
  std::size_t last = 0;
  for (std::size_t j = 1; j < L; ++j)
    if (delta[n - 1][j] + T(j, L + 1) > delta[n - 1][last] + T(last, L + 1)) last = j;
  ViterbiResult r;
  r.score = delta[n - 1][last] + T(last, L + 1);
  r.path.resize(n);
  r.path[n - 1] = static_cast<int>(last);
  for (std::size_t t = n - 1; t > 0; --t)
    r.path[t - 1] = back[t][static_cast<std::size_t>(r.path[t])];
  return r;
}

Var crfNegLogLikelihood(Var emissions, Var transitions, std::span<const int> gold) {
  const Tensor& E = emissions.value();
  const Tensor& T = transitions.value();
  const double logZ = crfLogPartition(E, T);
  const double nll = logZ - crfPathScore(E, T, gold);
  std::vector<int> path(gold.begin(), gold.end());
  return emissions.graph->push(
      Tensor::scalar(nll), {emissions.id, transitions.id},
      [eId = emissions.id, tId = transitions.id, path](Graph& g, int self) {
        const double up = g.gradRef(self).item();
        const Tensor& E = g.value(eId);
        const Tensor& T = g.value(tId);
        const std::size_t L = E.cols(), n = E.rows(), B = L, X = L + 1;
        const Lattice lat = forwardBackward(E, T);
        Tensor& gE = g.gradRef(eId);
        Tensor& gT = g.gradRef(tId);
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t j = 0; j < L; ++j) {
            const double p = std::exp(lat.alpha[t][j] + lat.beta[t][j] - lat.logZ);
            gE(t, j) += up * p;
            if (t == 0) gT(B, j) += up * p;
            if (t == n - 1) gT(j, X) += up * p;
          }
        for (std::size_t t = 1; t < n; ++t)
          for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j < L; ++j)
              gT(i, j) += up * std::exp(lat.alpha[t - 1][i] + T(i, j) + E(t, j) + lat.beta[t][j] - lat.logZ);
        const auto y = [&](std::size_t t) { return static_cast<std::size_t>(path[t]); };
        gT(B, y(0)) -= up;
        gT(y(n - 1), X) -= up;
        for (std::size_t t = 0; t < n; ++t) {
          gE(t, y(t)) -= up;
          if (t > 0) gT(y(t - 1), y(t)) -= up;
        }
      });
}

}  // namespace nluaug
