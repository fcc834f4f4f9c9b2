#pragma once

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "nluaug/params.hpp"
#include "nluaug/rng.hpp"
#include "nluaug/tensor.hpp"

namespace nluaug {

class Graph;

/// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
/// already topologically sorted; backward() walks it once in reverse.
/// A Graph is single-threaded and meant to be thrown away after one update.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  explicit Graph(bool training = false, Rng* rng = nullptr) : training_(training), rng_(rng) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return training_; }
  Rng* rng() const { return rng_; }

  Var constant(Tensor value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates; parameter gradients are
  /// accumulated into Parameter::grad (frozen parameters are skipped).
  void backward(Var loss);

  Var push(Tensor value, std::vector<int> parents, BackwardFn fn);
  const Tensor& value(int id) const { return nodes_[id].value; }
  Tensor& gradRef(int id);
  bool hasGrad(int id) const { return !nodes_[id].grad.empty(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  bool training_;
  Rng* rng_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> paramNodes_;
};

// ---------------------------------------------------------------------------
// Differentiable ops. All are row-major matrix ops; shape errors report both
// operand shapes.

Var matmul(Var a, Var b);
/// Elementwise sum; b may also be a single row broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise (Hadamard) product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var elu(Var a, double alpha = 1.0);
/// log(sigmoid(a)), stable for large |a|.
Var logSigmoid(Var a);
/// log(1 - exp(a)) for a < 0; inputs are capped at log(1 - 1e-12).
Var logOneMinusExp(Var a);
Var softmax(Var a);      // row-wise
Var logSoftmax(Var a);   // row-wise
/// Concatenate along axis 0 (stack rows) or axis 1 (join columns).
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
/// Half-open [begin, end) slice along axis 0 or 1.
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
/// Rows of an embedding table; gradient scatters into the table rows.
Var embedLookup(Graph& g, Parameter& table, std::span<const int> ids);
/// Valid 1-D convolution over time. x: T x Cin, w: (width*Cin) x Cout,
/// bias: 1 x Cout. Row k of w for offset o and channel c is o*Cin + c.
Var conv1d(Var x, Var w, Var bias, std::size_t width);
/// Column-wise max over rows: T x C -> 1 x C.
Var maxPoolOverTime(Var x);
/// Inverted dropout; identity when the graph is not training or rate == 0.
Var dropoutMask(Var a, double rate);
/// Row-wise normalisation followed by gain/bias (each 1 x C).
Var layerNorm(Var a, Var gain, Var bias, double eps = 1e-5);
/// Picks a(r, cols[r]) for every row: R x C -> R x 1.
Var pick(Var a, std::span<const int> cols);
Var sum(Var a);
Var mean(Var a);

/// Sum of rows weighted by a constant vector: sum_r w[r] * a(r, 0) for an R x 1 input.
Var weightedSum(Var a, std::span<const double> weights);

}  // namespace nluaug
