#pragma once

#include <span>
#include <string>
#include <vector>

#include "nluaug/graph.hpp"
#include "nluaug/params.hpp"
#include "nluaug/rng.hpp"

namespace nluaug {

Tensor xavierUniform(std::size_t fanIn, std::size_t fanOut, Rng& rng);
/// rows x cols matrix with orthonormal columns (or rows, when rows < cols).
Tensor orthogonal(std::size_t rows, std::size_t cols, Rng& rng);
Tensor uniformTable(std::size_t rows, std::size_t cols, double limit, Rng& rng);

struct Dense {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out

  static Dense create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                      Rng& rng);
  std::size_t inputs() const { return weight->value.rows(); }
  std::size_t outputs() const { return weight->value.cols(); }
  Var operator()(Graph& g, Var x) const;
  /// y = x W + b for a single row, without a tape.
  void apply(std::span<const double> x, std::span<double> y) const;
};

/// Single-layer LSTM with gates packed as [input, forget, cell, output].
struct Lstm {
  Parameter* inputWeight = nullptr;      // in x 4h
  Parameter* recurrentWeight = nullptr;  // h x 4h
  Parameter* bias = nullptr;             // 1 x 4h
  std::size_t hidden = 0;

  /// Xavier input weights, orthogonal recurrent blocks, zero bias with
  /// forget-gate bias 1.
  static Lstm create(ParameterSet& ps, const std::string& name, std::size_t in,
                     std::size_t hidden, Rng& rng);
  std::size_t inputs() const { return inputWeight->value.rows(); }

  /// Runs over the rows of xs (T x in) and returns the T x h hidden states;
  /// reverse processes the rows back to front (outputs stay aligned).
  Var run(Graph& g, Var xs, bool reverse = false) const;

  struct State {
    std::vector<double> h;
    std::vector<double> c;
  };
  State initialState() const { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
  /// One tape-free step; agrees with one step of run() up to rounding.
  void step(std::span<const double> x, State& state) const;
};

}  // namespace nluaug
