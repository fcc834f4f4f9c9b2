#include "nluaug/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nluaug/error.hpp"

namespace nluaug {

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

Var Graph::param(Parameter& p) {
  if (auto it = paramNodes_.find(&p); it != paramNodes_.end()) return {this, it->second};
  Var v = push(p.value, {}, nullptr);
  nodes_[v.id].param = &p;
  paramNodes_.emplace(&p, v.id);
  return v;
}

Var Graph::push(Tensor value, std::vector<int> parents, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(parents), std::move(fn), nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Graph::gradRef(int id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ConfigError("backward: loss belongs to another graph");
  if (value(loss.id).size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shapeString(value(loss.id)));
  gradRef(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr && !n.param->frozen) {
      auto& pg = n.param->grad.storage();
      const auto& g = n.grad.storage();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
    }
  }
}

namespace {

Graph& graphOf(Var a) {
  if (!a.valid()) throw ConfigError("op on an empty Var");
  return *a.graph;
}

Graph& graphOf(Var a, Var b) {
  if (a.graph != b.graph) throw ConfigError("op mixes Vars from different graphs");
  return graphOf(a);
}

[[noreturn]] void shapeMismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shapeString(a) + " and " +
                   shapeString(b));
}

template <class F, class D>
Var unary(Var a, F f, D dfdx_from_xy) {
  Graph& g = graphOf(a);
  const Tensor& x = a.value();
  Tensor y(std::vector<std::size_t>{x.rows(), x.cols()});
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return g.push(std::move(y), {a.id}, [a, dfdx_from_xy](Graph& gr, int self) {
    const Tensor& xv = gr.value(a.id);
    const Tensor& yv = gr.value(self);
    const Tensor& gy = gr.gradRef(self);
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * dfdx_from_xy(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graphOf(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.cols() != w.rows()) shapeMismatch("matmul", x, w);
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  Tensor y = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* yr = &y(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      const double* wr = &w(p, 0);
      for (std::size_t j = 0; j < m; ++j) yr[j] += xv * wr[j];
    }
  }
  return g.push(std::move(y), {a.id, b.id}, [a, b](Graph& gr, int self) {
    const Tensor& xv = gr.value(a.id);
    const Tensor& wv = gr.value(b.id);
    const Tensor& gy = gr.gradRef(self);
    const std::size_t n = xv.rows(), k = xv.cols(), m = wv.cols();
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double* wr = &wv(p, 0);
        const double* gyr = &gy(i, 0);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += gyr[j] * wr[j];
        gx(i, p) += s;
      }
    Tensor& gw = gr.gradRef(b.id);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double xv_ip = xv(i, p);
        if (xv_ip == 0.0) continue;
        double* gwr = &gw(p, 0);
        const double* gyr = &gy(i, 0);
        for (std::size_t j = 0; j < m; ++j) gwr[j] += xv_ip * gyr[j];
      }
  });
}

namespace {
Var addScaled(Var a, Var b, double sign) {
  Graph& g = graphOf(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const bool broadcast = !x.sameShape(z);
  if (broadcast && !(z.rows() == 1 && z.cols() == x.cols())) shapeMismatch("add", x, z);
  Tensor y(std::vector<std::size_t>{x.rows(), x.cols()});
  const std::size_t c = x.cols();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + sign * z[broadcast ? i % c : i];
  return g.push(std::move(y), {a.id, b.id}, [a, b, broadcast, sign](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    Tensor& ga = gr.gradRef(a.id);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    Tensor& gb = gr.gradRef(b.id);
    const std::size_t c = gy.cols();
    for (std::size_t i = 0; i < gy.size(); ++i) gb[broadcast ? i % c : i] += sign * gy[i];
  });
}
}  // namespace

Var add(Var a, Var b) { return addScaled(a, b, 1.0); }
Var sub(Var a, Var b) { return addScaled(a, b, -1.0); }

Var mul(Var a, Var b) {
  Graph& g = graphOf(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (!x.sameShape(z)) shapeMismatch("mul", x, z);
  Tensor y(std::vector<std::size_t>{x.rows(), x.cols()});
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * z[i];
  return g.push(std::move(y), {a.id, b.id}, [a, b](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    const Tensor& xv = gr.value(a.id);
    const Tensor& zv = gr.value(b.id);
    Tensor& ga = gr.gradRef(a.id);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * zv[i];
    Tensor& gb = gr.gradRef(b.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * xv[i];
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var elu(Var a, double alpha) {
  return unary(
      a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Var logSigmoid(Var a) {
  return unary(
      a, [](double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(x)); });
}

Var logOneMinusExp(Var a) {
  static const double cap = std::log1p(-1e-12);
  return unary(
      a, [](double x) { return std::log(-std::expm1(std::min(x, cap))); },
      [](double x, double) {
        if (x > cap) return 0.0;
        return -std::exp(x) / -std::expm1(x);
      });
}

Var softmax(Var a) {
  Graph& g = graphOf(a);
  const Tensor& x = a.value();
  Tensor y(std::vector<std::size_t>{x.rows(), x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.rowSpan(r);
    auto yr = y.rowSpan(r);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (std::size_t c = 0; c < xr.size(); ++c) s += (yr[c] = std::exp(xr[c] - mx));
    for (double& v : yr) v /= s;
  }
  return g.push(std::move(y), {a.id}, [a](Graph& gr, int self) {
    const Tensor& yv = gr.value(self);
    const Tensor& gy = gr.gradRef(self);
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < yv.cols(); ++c) dot += gy(r, c) * yv(r, c);
      for (std::size_t c = 0; c < yv.cols(); ++c) gx(r, c) += yv(r, c) * (gy(r, c) - dot);
    }
  });
}

Var logSoftmax(Var a) {
  Graph& g = graphOf(a);
  const Tensor& x = a.value();
  Tensor y(std::vector<std::size_t>{x.rows(), x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.rowSpan(r);
    auto yr = y.rowSpan(r);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (double v : xr) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < xr.size(); ++c) yr[c] = xr[c] - lse;
  }
  return g.push(std::move(y), {a.id}, [a](Graph& gr, int self) {
    const Tensor& yv = gr.value(self);
    const Tensor& gy = gr.gradRef(self);
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < yv.cols(); ++c) total += gy(r, c);
      for (std::size_t c = 0; c < yv.cols(); ++c)
        gx(r, c) += gy(r, c) - std::exp(yv(r, c)) * total;
    }
  });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ConfigError("concat: axis must be 0 or 1");
  Graph& g = graphOf(parts[0]);
  const Tensor& first = parts[0].value();
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ConfigError("concat mixes graphs");
    const Tensor& t = p.value();
    if (axis == 0) {
      if (t.cols() != first.cols()) shapeMismatch("concat(axis=0)", first, t);
      rows += t.rows();
      cols = t.cols();
    } else {
      if (t.rows() != first.rows()) shapeMismatch("concat(axis=1)", first, t);
      cols += t.cols();
      rows = t.rows();
    }
  }
  Tensor y = Tensor::matrix(rows, cols);
  std::vector<int> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    ids.push_back(p.id);
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c)
        (axis == 0 ? y(offset + r, c) : y(r, offset + c)) = t(r, c);
    offset += axis == 0 ? t.rows() : t.cols();
  }
  return g.push(std::move(y), ids, [ids, axis](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    std::size_t off = 0;
    for (int id : ids) {
      Tensor& gx = gr.gradRef(id);
      for (std::size_t r = 0; r < gx.rows(); ++r)
        for (std::size_t c = 0; c < gx.cols(); ++c)
          gx(r, c) += axis == 0 ? gy(off + r, c) : gy(r, off + c);
      off += axis == 0 ? gx.rows() : gx.cols();
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  Graph& g = graphOf(a);
  const Tensor& x = a.value();
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if ((axis != 0 && axis != 1) || begin >= end || end > extent)
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " of " + shapeString(x));
  const std::size_t rows = axis == 0 ? end - begin : x.rows();
  const std::size_t cols = axis == 1 ? end - begin : x.cols();
  Tensor y = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      y(r, c) = axis == 0 ? x(begin + r, c) : x(r, begin + c);
  return g.push(std::move(y), {a.id}, [a, axis, begin](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t r = 0; r < gy.rows(); ++r)
      for (std::size_t c = 0; c < gy.cols(); ++c)
        (axis == 0 ? gx(begin + r, c) : gx(r, begin + c)) += gy(r, c);
  });
}

Var embedLookup(Graph& g, Parameter& table, std::span<const int> ids) {
  const Tensor& t = table.value;
  const std::size_t d = t.cols();
  Tensor y = Tensor::matrix(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= t.rows())
      throw ShapeError("embedLookup: id " + std::to_string(ids[i]) + " outside table " +
                       shapeString(t) + " ('" + table.name + "')");
    auto src = t.rowSpan(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), y.rowSpan(i).begin());
  }
  std::vector<int> idCopy(ids.begin(), ids.end());
  Parameter* p = &table;
  return g.push(std::move(y), {}, [p, idCopy](Graph& gr, int self) {
    if (p->frozen) return;
    const Tensor& gy = gr.gradRef(self);
    for (std::size_t i = 0; i < idCopy.size(); ++i) {
      auto dst = p->grad.rowSpan(static_cast<std::size_t>(idCopy[i]));
      auto src = gy.rowSpan(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var conv1d(Var x, Var w, Var bias, std::size_t width) {
  Graph& g = graphOf(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = bias.value();
  const std::size_t T = xv.rows(), cin = xv.cols(), cout = wv.cols();
  if (width == 0 || wv.rows() != width * cin) shapeMismatch("conv1d(weights)", xv, wv);
  if (bv.rows() != 1 || bv.cols() != cout) shapeMismatch("conv1d(bias)", wv, bv);
  if (T < width) shapeMismatch("conv1d(input shorter than kernel)", xv, wv);
  const std::size_t out = T - width + 1;
  Tensor y = Tensor::matrix(out, cout);
  for (std::size_t t = 0; t < out; ++t) {
    auto yr = y.rowSpan(t);
    for (std::size_t j = 0; j < cout; ++j) yr[j] = bv[j];
    for (std::size_t o = 0; o < width; ++o)
      for (std::size_t c = 0; c < cin; ++c) {
        const double xval = xv(t + o, c);
        const double* wr = &wv(o * cin + c, 0);
        for (std::size_t j = 0; j < cout; ++j) yr[j] += xval * wr[j];
      }
  }
  return g.push(std::move(y), {x.id, w.id, bias.id}, [x, w, bias, width](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    const Tensor& xv = gr.value(x.id);
    const Tensor& wv = gr.value(w.id);
    const std::size_t cin = xv.cols(), cout = wv.cols();
    Tensor& gx = gr.gradRef(x.id);
    Tensor& gw = gr.gradRef(w.id);
    Tensor& gb = gr.gradRef(bias.id);
    for (std::size_t t = 0; t < gy.rows(); ++t) {
      for (std::size_t j = 0; j < cout; ++j) gb[j] += gy(t, j);
      for (std::size_t o = 0; o < width; ++o)
        for (std::size_t c = 0; c < cin; ++c) {
          const double* wr = &wv(o * cin + c, 0);
          double* gwr = &gw(o * cin + c, 0);
          const double xval = xv(t + o, c);
          double s = 0.0;
          for (std::size_t j = 0; j < cout; ++j) {
            s += gy(t, j) * wr[j];
            gwr[j] += xval * gy(t, j);
          }
          gx(t + o, c) += s;
        }
    }
  });
}

Var maxPoolOverTime(Var x) {
  Graph& g = graphOf(x);
  const Tensor& xv = x.value();
  Tensor y = Tensor::matrix(1, xv.cols());
  std::vector<std::size_t> argmax(xv.cols(), 0);
  for (std::size_t c = 0; c < xv.cols(); ++c) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < xv.rows(); ++r)
      if (xv(r, c) > best) {
        best = xv(r, c);
        argmax[c] = r;
      }
    y[c] = best;
  }
  return g.push(std::move(y), {x.id}, [x, argmax](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    Tensor& gx = gr.gradRef(x.id);
    for (std::size_t c = 0; c < argmax.size(); ++c) gx(argmax[c], c) += gy[c];
  });
}

Var dropoutMask(Var a, double rate) {
  Graph& g = graphOf(a);
  if (!g.training() || rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  if (g.rng() == nullptr) throw ConfigError("training graph has no RNG for dropout");
  const Tensor& x = a.value();
  std::vector<double> mask(x.size());
  const double keep = 1.0 - rate;
  for (double& m : mask) m = g.rng()->uniform() < keep ? 1.0 / keep : 0.0;
  Tensor y(std::vector<std::size_t>{x.rows(), x.cols()});
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
  return g.push(std::move(y), {a.id}, [a, mask](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
  });
}

Var layerNorm(Var a, Var gain, Var bias, double eps) {
  Graph& g = graphOf(a, gain);
  const Tensor& x = a.value();
  const std::size_t R = x.rows(), C = x.cols();
  if (gain.value().size() != C) shapeMismatch("layerNorm(gain)", x, gain.value());
  if (bias.value().size() != C) shapeMismatch("layerNorm(bias)", x, bias.value());
  Tensor y = Tensor::matrix(R, C);
  Tensor xhat = Tensor::matrix(R, C);
  std::vector<double> invStd(R);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < R; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < C; ++c) mu += x(r, c);
    mu /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(C);
    invStd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) {
      xhat(r, c) = (x(r, c) - mu) * invStd[r];
      y(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  }
  return g.push(std::move(y), {a.id, gain.id, bias.id},
                [a, gain, bias, xhat, invStd](Graph& gr, int self) {
                  const Tensor& gy = gr.gradRef(self);
                  const Tensor& gv = gr.value(gain.id);
                  Tensor& gx = gr.gradRef(a.id);
                  Tensor& gg = gr.gradRef(gain.id);
                  Tensor& gb = gr.gradRef(bias.id);
                  const std::size_t R = gy.rows(), C = gy.cols();
                  for (std::size_t r = 0; r < R; ++r) {
                    double sumD = 0.0, sumDx = 0.0;
                    for (std::size_t c = 0; c < C; ++c) {
                      const double d = gy(r, c) * gv[c];
                      sumD += d;
                      sumDx += d * xhat(r, c);
                      gg[c] += gy(r, c) * xhat(r, c);
                      gb[c] += gy(r, c);
                    }
                    const double n = static_cast<double>(C);
                    for (std::size_t c = 0; c < C; ++c) {
                      const double d = gy(r, c) * gv[c];
                      gx(r, c) += invStd[r] / n * (n * d - sumD - xhat(r, c) * sumDx);
                    }
                  }
                });
}

Var pick(Var a, std::span<const int> cols) {
  Graph& g = graphOf(a);
  const Tensor& x = a.value();
  if (cols.size() != x.rows())
    throw ShapeError("pick: " + std::to_string(cols.size()) + " indices for " + shapeString(x));
  Tensor y = Tensor::matrix(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (cols[r] < 0 || static_cast<std::size_t>(cols[r]) >= x.cols())
      throw ShapeError("pick: column " + std::to_string(cols[r]) + " outside " + shapeString(x));
    y[r] = x(r, static_cast<std::size_t>(cols[r]));
  }
  std::vector<int> idx(cols.begin(), cols.end());
  return g.push(std::move(y), {a.id}, [a, idx](Graph& gr, int self) {
    const Tensor& gy = gr.gradRef(self);
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t r = 0; r < idx.size(); ++r) gx(r, static_cast<std::size_t>(idx[r])) += gy[r];
  });
}

Var sum(Var a) {
  Graph& g = graphOf(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return g.push(Tensor::scalar(s), {a.id}, [a](Graph& gr, int self) {
    const double gy = gr.gradRef(self)[0];
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var weightedSum(Var a, std::span<const double> weights) {
  Graph& g = graphOf(a);
  const Tensor& x = a.value();
  if (weights.size() != x.size())
    throw ShapeError("weightedSum: " + std::to_string(weights.size()) + " weights for " +
                     shapeString(x));
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
  std::vector<double> w(weights.begin(), weights.end());
  return g.push(Tensor::scalar(s), {a.id}, [a, w](Graph& gr, int self) {
    const double gy = gr.gradRef(self)[0];
    Tensor& gx = gr.gradRef(a.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy * w[i];
  });
}

}  // namespace nluaug
