#include "nluaug/layers.hpp"

#include <cmath>

#include "nluaug/error.hpp"

namespace nluaug {

Tensor xavierUniform(std::size_t fanIn, std::size_t fanOut, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fanIn + fanOut));
  return uniformTable(fanIn, fanOut, limit, rng);
}

Tensor uniformTable(std::size_t rows, std::size_t cols, double limit, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

Tensor orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
  // Gram-Schmidt on the longer dimension's vectors of a Gaussian matrix.
  const bool byColumns = rows >= cols;
  const std::size_t n = byColumns ? cols : rows;  // number of vectors
  const std::size_t dim = byColumns ? rows : cols;
  std::vector<std::vector<double>> vecs(n, std::vector<double>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (;;) {
      for (double& v : vecs[i]) v = rng.normal();
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += vecs[i][k] * vecs[j][k];
        for (std::size_t k = 0; k < dim; ++k) vecs[i][k] -= dot * vecs[j][k];
      }
      double norm = 0.0;
      for (double v : vecs[i]) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (double& v : vecs[i]) v /= norm;
        break;
      }
    }
  }
  Tensor t = Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dim; ++k) (byColumns ? t(k, i) : t(i, k)) = vecs[i][k];
  return t;
}

Dense Dense::create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                    Rng& rng) {
  Dense d;
  d.weight = &ps.add(name + ".weight", xavierUniform(in, out, rng));
  d.bias = &ps.add(name + ".bias", Tensor::matrix(1, out));
  return d;
}

Var Dense::operator()(Graph& g, Var x) const {
  return add(matmul(x, g.param(*weight)), g.param(*bias));
}

void Dense::apply(std::span<const double> x, std::span<double> y) const {
  const Tensor& w = weight->value;
  const Tensor& b = bias->value;
  if (x.size() != w.rows() || y.size() != w.cols())
    throw ShapeError("Dense::apply: input " + std::to_string(x.size()) + " vs weight " +
                     shapeString(w));
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = b[j];
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    const double* wr = &w(i, 0);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += x[i] * wr[j];
  }
}

Lstm Lstm::create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
                  Rng& rng) {
  Lstm l;
  l.hidden = hidden;
  Tensor wx = Tensor::matrix(in, 4 * hidden);
  Tensor wh = Tensor::matrix(hidden, 4 * hidden);
  for (std::size_t gate = 0; gate < 4; ++gate) {
    Tensor xg = xavierUniform(in, hidden, rng);
    Tensor hg = orthogonal(hidden, hidden, rng);
    for (std::size_t r = 0; r < in; ++r)
      for (std::size_t c = 0; c < hidden; ++c) wx(r, gate * hidden + c) = xg(r, c);
    for (std::size_t r = 0; r < hidden; ++r)
      for (std::size_t c = 0; c < hidden; ++c) wh(r, gate * hidden + c) = hg(r, c);
  }
  Tensor b = Tensor::matrix(1, 4 * hidden);
  for (std::size_t c = 0; c < hidden; ++c) b[hidden + c] = 1.0;
  l.inputWeight = &ps.add(name + ".input_weight", std::move(wx));
  l.recurrentWeight = &ps.add(name + ".recurrent_weight", std::move(wh));
  l.bias = &ps.add(name + ".bias", std::move(b));
  return l;
}

Var Lstm::run(Graph& g, Var xs, bool reverse) const {
  const std::size_t T = xs.rows();
  const std::size_t H = hidden;
  Var projected = add(matmul(xs, g.param(*inputWeight)), g.param(*bias));
  Var wh = g.param(*recurrentWeight);
  Var h = g.constant(Tensor::matrix(1, H));
  Var c = g.constant(Tensor::matrix(1, H));
  std::vector<Var> outputs(T);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    Var z = add(slice(projected, 0, t, t + 1), matmul(h, wh));
    Var i = sigmoid(slice(z, 1, 0, H));
    Var f = sigmoid(slice(z, 1, H, 2 * H));
    Var cand = tanh(slice(z, 1, 2 * H, 3 * H));
    Var o = sigmoid(slice(z, 1, 3 * H, 4 * H));
    c = add(mul(f, c), mul(i, cand));
    h = mul(o, tanh(c));
    outputs[t] = h;
  }
  return concat(outputs, 0);
}

void Lstm::step(std::span<const double> x, State& state) const {
  const std::size_t H = hidden;
  const Tensor& wx = inputWeight->value;
  const Tensor& wh = recurrentWeight->value;
  const Tensor& b = bias->value;
  std::vector<double> z(b.data().begin(), b.data().end());
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r] == 0.0) continue;
    const double* wr = &wx(r, 0);
    for (std::size_t j = 0; j < 4 * H; ++j) z[j] += x[r] * wr[j];
  }
  for (std::size_t r = 0; r < H; ++r) {
    const double hr = state.h[r];
    if (hr == 0.0) continue;
    const double* wr = &wh(r, 0);
    for (std::size_t j = 0; j < 4 * H; ++j) z[j] += hr * wr[j];
  }
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sig(z[j]);
    const double f = sig(z[H + j]);
    const double cand = std::tanh(z[2 * H + j]);
    const double o = sig(z[3 * H + j]);
    state.c[j] = f * state.c[j] + i * cand;
    state.h[j] = o * std::tanh(state.c[j]);
  }
}

}  // namespace nluaug
