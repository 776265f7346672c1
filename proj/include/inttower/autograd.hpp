#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "inttower/params.hpp"
#include "inttower/tensor.hpp"

namespace inttower {

class Graph;

// Handle to a node on a Graph's tape.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// tape backwards is a reverse topological order and every node is visited
// once. A graph lives for one training step (or one inference) and is not
// shared between threads.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  // record_grad=false builds an inference-only graph: no closures are kept
  // and backward() is unavailable.
  explicit Graph(bool record_grad = true) : record_(record_grad) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var input(Tensor value);  // leaf that collects its own gradient
  Var param(Parameter& p);  // leaf whose gradient accumulates into p.grad

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;  // empty tensor if no gradient reached v
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient buffer for v, zero-initialized on first use.
  Tensor& grad_buffer(Var v);
  Parameter* bound_param(Var v) const { return nodes_[v.id].param; }

  // Appends an op result. The backward function receives d(loss)/d(out)
  // and is responsible for accumulating into its parents' buffers.
  Var push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
  Var push(Tensor value, std::span<const Var> parents, BackwardFn backward);

  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  // deque: value() references stay valid while later ops are recorded.
  std::deque<Node> nodes_;
};

// Differentiable ops. Shapes follow the batch-major convention: rows are
// instances, columns are features. Per-row reductions return r x 1.
namespace ag {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_bias(Var a, Var bias);  // a[r x c] + bias[c]
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var x);
Var sigmoid(Var x);
Var log(Var x);
Var exp(Var x);
Var softmax(Var x);      // per row
Var log_softmax(Var x);  // per row
// Per-chunk x / max(||x||, 1e-12); chunk 0 means the whole row.
Var l2_normalize(Var x, std::size_t chunk = 0);
Var concat(std::span<const Var> parts, int axis);
Var mean(Var x, int axis);  // axis 0 -> 1 x c, axis 1 -> r x 1
Var sum(Var x);             // scalar
Var sum_squares(Var x);     // scalar
Var row_dot(Var a, Var b);  // r x 1
Var max_cols(Var x, std::vector<std::int32_t>* argmax = nullptr);  // r x 1, lowest index on ties
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var reshape(Var x, Shape shape);
Var diag(Var x);  // square r x r -> r x 1
// Embedding lookup: row ids[i] of table becomes output row i.
Var gather_rows(Var table, std::span<const std::uint32_t> ids);
// Field-wise mean over consecutive groups of `width` columns: r x (c/width).
Var segment_mean(Var x, std::size_t width);
// Scales group f of each row by w[row, f].
Var segment_scale(Var x, Var w, std::size_t width);
// Sum of per-user-head max inner products; u is r x (hu*p), v is r x (hv*p).
Var maxsim(Var u, Var v, std::size_t head_dim);

}  // namespace ag
}  // namespace inttower
