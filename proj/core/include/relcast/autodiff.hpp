#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "relcast/tensor.hpp"

namespace relcast::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One tape entry: the forward value plus a pull-style backward closure that
/// reads this node's gradient and accumulates into its parents'.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first use during backward
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

/// Handle to a tape node. Cheap to copy; the graph is kept alive by these
/// handles (parameters hold their leaves, activations die with the loss).
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

/// Constant input (no gradient ever flows into it).
Var constant(Tensor t);
/// Gradient leaf; parameters are created through ParamStore which wraps this.
Var leaf(Tensor t, bool requires_grad = true);

/// Reverse pass from a scalar root: zeroes the gradients of every node
/// reachable from `root`, seeds d(root)=1 and runs the closures in reverse
/// topological order. Leaf gradients survive in their nodes afterwards.
void backward(const Var& root);

/// While at least one guard is alive, ops record no parents and no closures;
/// inference builds no graph.
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// ---- primitive ops (all shapes are validated, outputs checked finite) ----

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// x: [R x C], b: [C]; adds b to every row.
Var add_bias(const Var& x, const Var& b);
/// x: [R x C], gate: [R] constant; multiplies row r by gate[r].
Var mul_rows(const Var& x, const Tensor& gate);
Var matmul(const Var& a, const Var& b);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);
Var concat_cols(const std::vector<Var>& xs);
Var concat_rows(const std::vector<Var>& xs);
Var slice_rows(const Var& x, int64_t r0, int64_t n);
Var slice_cols(const Var& x, int64_t c0, int64_t n);
Var gather_rows(const Var& x, std::vector<int64_t> idx);
/// Per-segment elementwise max; empty segments yield zeros. Ties route the
/// gradient to the first maximal row.
Var segment_max(const Var& x, std::vector<int64_t> segment_ids, int64_t n_segments);
/// x: [T x C] -> [T x k*C]; row t concatenates rows t-pad .. t-pad+k-1 with
/// zeros outside the sequence. Throws if k > T + 2*pad.
Var unfold1d(const Var& x, int64_t k, int64_t pad);
Var sum(const Var& x);
Var mean(const Var& x);
/// Same data, new shape (element count must match).
Var reshape(const Var& x, std::vector<int64_t> shape);
Var softmax(const Var& logits);  // rank-1

/// -(1-p_t)^gamma * log(p_t) with p_t = softmax(logits)[target].
Var softmax_focal_loss(const Var& logits, int64_t target, double gamma);
/// Elementwise Huber against a constant target, mean-reduced.
Var huber(const Var& pred, const Tensor& target, double delta);

}  // namespace relcast::ad
