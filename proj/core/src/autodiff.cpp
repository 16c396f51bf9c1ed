#include "relcast/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace relcast::ad {

namespace {

thread_local int g_no_grad_depth = 0;

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename F>
void dispatch(Dtype dt, F&& f) {
  if (dt == Dtype::f32)
    f.template operator()<float>();
  else
    f.template operator()<double>();
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_same_dtype(const Var& a, const Var& b, const char* op) {
  if (a.value().dtype() != b.value().dtype())
    throw std::invalid_argument(std::string(op) + ": dtype mismatch");
}

Var make_node(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool any_grad = false;
  for (const auto& p : parents) any_grad = any_grad || p->requires_grad;
  if (any_grad && grad_enabled()) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(bw);
  }
  return Var(n);
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (!grad.same_shape(value) || grad.dtype() != value.dtype())
    grad = Tensor::zeros(value.shape(), value.dtype());
  return grad;
}

bool grad_enabled() { return g_no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = false;
  return Var(n);
}

Var leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = requires_grad && grad_enabled();
  return Var(n);
}

void backward(const Var& root) {
  require(root.defined() && root.value().size() == 1, "backward: root must be scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order over grad-requiring nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    Tensor& g = n->grad_buffer();
    for (int64_t i = 0; i < g.size(); ++i) g.set(i, 0.0);
  }
  root.node()->grad_buffer().set(0, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "add: shape mismatch");
  require_same_dtype(a, b, "add");
  Tensor out = Tensor::zeros(a.value().shape(), a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto av = a.value().data<T>(), bv = b.value().data<T>();
    auto ov = out.data<T>();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  });
  ensure_finite(out, "add");
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn}, [an, bn](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      if (an->requires_grad) {
        auto ga = an->grad_buffer().data<T>();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->grad_buffer().data<T>();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "sub: shape mismatch");
  require_same_dtype(a, b, "sub");
  Tensor out = Tensor::zeros(a.value().shape(), a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto av = a.value().data<T>(), bv = b.value().data<T>();
    auto ov = out.data<T>();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  });
  ensure_finite(out, "sub");
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn}, [an, bn](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      if (an->requires_grad) {
        auto ga = an->grad_buffer().data<T>();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->grad_buffer().data<T>();
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  });
}

Var mul(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "mul: shape mismatch");
  require_same_dtype(a, b, "mul");
  Tensor out = Tensor::zeros(a.value().shape(), a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto av = a.value().data<T>(), bv = b.value().data<T>();
    auto ov = out.data<T>();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  });
  ensure_finite(out, "mul");
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn}, [an, bn](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto av = an->value.data<T>(), bv = bn->value.data<T>();
      if (an->requires_grad) {
        auto ga = an->grad_buffer().data<T>();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->grad_buffer().data<T>();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  });
}

Var scale(const Var& a, double s) {
  Tensor out = Tensor::zeros(a.value().shape(), a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto av = a.value().data<T>();
    auto ov = out.data<T>();
    const T ts = static_cast<T>(s);
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * ts;
  });
  ensure_finite(out, "scale");
  auto an = a.node();
  return make_node(std::move(out), {an}, [an, s](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto ga = an->grad_buffer().data<T>();
      const T ts = static_cast<T>(s);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ts;
    });
  });
}

Var add_bias(const Var& x, const Var& b) {
  require(x.value().rank() == 2 && b.value().rank() == 1, "add_bias: expects [RxC] and [C]");
  require(x.value().cols() == b.value().size(), "add_bias: width mismatch");
  require_same_dtype(x, b, "add_bias");
  const int64_t rows = x.value().rows(), cols = x.value().cols();
  Tensor out = Tensor::zeros(x.value().shape(), x.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto xv = x.value().data<T>(), bv = b.value().data<T>();
    auto ov = out.data<T>();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) ov[r * cols + c] = xv[r * cols + c] + bv[c];
  });
  ensure_finite(out, "add_bias");
  auto xn = x.node(), bn = b.node();
  return make_node(std::move(out), {xn, bn}, [xn, bn, rows, cols](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      if (xn->requires_grad) {
        auto gx = xn->grad_buffer().data<T>();
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->grad_buffer().data<T>();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    });
  });
}

Var mul_rows(const Var& x, const Tensor& gate) {
  require(x.value().rank() == 2, "mul_rows: expects rank-2 input");
  require(gate.size() == x.value().rows(), "mul_rows: gate length mismatch");
  const int64_t rows = x.value().rows(), cols = x.value().cols();
  Tensor out = Tensor::zeros(x.value().shape(), x.value().dtype());
  Tensor gate64 = gate.to(Dtype::f64);
  dispatch(out.dtype(), [&]<typename T>() {
    auto xv = x.value().data<T>();
    auto ov = out.data<T>();
    for (int64_t r = 0; r < rows; ++r) {
      const T s = static_cast<T>(gate64.at(r));
      for (int64_t c = 0; c < cols; ++c) ov[r * cols + c] = xv[r * cols + c] * s;
    }
  });
  ensure_finite(out, "mul_rows");
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, gate64, rows, cols](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto gx = xn->grad_buffer().data<T>();
      for (int64_t r = 0; r < rows; ++r) {
        const T s = static_cast<T>(gate64.at(r));
        for (int64_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * s;
      }
    });
  });
}

Var matmul(const Var& a, const Var& b) {
  require(a.value().rank() == 2 && b.value().rank() == 2, "matmul: expects rank-2 inputs");
  require(a.value().cols() == b.value().rows(), "matmul: inner dimension mismatch");
  require_same_dtype(a, b, "matmul");
  const int64_t m = a.value().rows(), k = a.value().cols(), p = b.value().cols();
  Tensor out = Tensor::zeros({m, p}, a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    ConstMatMap<T> am(a.value().data<T>().data(), m, k);
    ConstMatMap<T> bm(b.value().data<T>().data(), k, p);
    MatMap<T> om(out.data<T>().data(), m, p);
    om.noalias() = am * bm;
  });
  ensure_finite(out, "matmul");
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn}, [an, bn, m, k, p](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      ConstMatMap<T> g(n.grad.data<T>().data(), m, p);
      if (an->requires_grad) {
        ConstMatMap<T> bm(bn->value.data<T>().data(), k, p);
        MatMap<T> ga(an->grad_buffer().data<T>().data(), m, k);
        ga.noalias() += g * bm.transpose();
      }
      if (bn->requires_grad) {
        ConstMatMap<T> am(an->value.data<T>().data(), m, k);
        MatMap<T> gb(bn->grad_buffer().data<T>().data(), k, p);
        gb.noalias() += am.transpose() * g;
      }
    });
  });
}

Var relu(const Var& a) {
  Tensor out = Tensor::zeros(a.value().shape(), a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto av = a.value().data<T>();
    auto ov = out.data<T>();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > T(0) ? av[i] : T(0);
  });
  auto an = a.node();
  return make_node(std::move(out), {an}, [an](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto av = an->value.data<T>();
      auto ga = an->grad_buffer().data<T>();
      for (size_t i = 0; i < g.size(); ++i)
        if (av[i] > T(0)) ga[i] += g[i];
    });
  });
}

Var sigmoid(const Var& a) {
  Tensor out = Tensor::zeros(a.value().shape(), a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto av = a.value().data<T>();
    auto ov = out.data<T>();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = T(1) / (T(1) + std::exp(-av[i]));
  });
  ensure_finite(out, "sigmoid");
  auto an = a.node();
  NodePtr self_holder;
  Var v = make_node(std::move(out), {an}, [an](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto ov = n.value.data<T>();
      auto ga = an->grad_buffer().data<T>();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i] * (T(1) - ov[i]);
    });
  });
  return v;
}

Var tanh_op(const Var& a) {
  Tensor out = Tensor::zeros(a.value().shape(), a.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto av = a.value().data<T>();
    auto ov = out.data<T>();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(av[i]);
  });
  auto an = a.node();
  return make_node(std::move(out), {an}, [an](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto ov = n.value.data<T>();
      auto ga = an->grad_buffer().data<T>();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - ov[i] * ov[i]);
    });
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols: empty input list");
  const int64_t rows = xs[0].value().rows();
  int64_t total = 0;
  for (const auto& x : xs) {
    require(x.value().rank() == 2, "concat_cols: expects rank-2 inputs");
    require(x.value().rows() == rows, "concat_cols: row count mismatch");
    total += x.value().cols();
  }
  Tensor out = Tensor::zeros({rows, total}, xs[0].value().dtype());
  std::vector<NodePtr> parents;
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& x : xs) {
    require_same_dtype(xs[0], x, "concat_cols");
    const int64_t c = x.value().cols();
    dispatch(out.dtype(), [&]<typename T>() {
      auto xv = x.value().data<T>();
      auto ov = out.data<T>();
      for (int64_t r = 0; r < rows; ++r)
        std::copy_n(xv.data() + r * c, c, ov.data() + r * total + off);
    });
    parents.push_back(x.node());
    offsets.push_back(off);
    off += c;
  }
  return make_node(std::move(out), std::move(parents),
                   [rows, total, offsets](Node& n) {
                     dispatch(n.value.dtype(), [&]<typename T>() {
                       auto g = n.grad.data<T>();
                       for (size_t k = 0; k < n.parents.size(); ++k) {
                         Node* p = n.parents[k].get();
                         if (!p->requires_grad) continue;
                         const int64_t c = p->value.cols(), o = offsets[k];
                         auto gp = p->grad_buffer().data<T>();
                         for (int64_t r = 0; r < rows; ++r)
                           for (int64_t j = 0; j < c; ++j)
                             gp[r * c + j] += g[r * total + o + j];
                       }
                     });
                   });
}

Var concat_rows(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_rows: empty input list");
  const int64_t cols = xs[0].value().cols();
  int64_t total = 0;
  for (const auto& x : xs) {
    require(x.value().rank() == 2, "concat_rows: expects rank-2 inputs");
    require(x.value().cols() == cols, "concat_rows: column count mismatch");
    total += x.value().rows();
  }
  Tensor out = Tensor::zeros({total, cols}, xs[0].value().dtype());
  std::vector<NodePtr> parents;
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& x : xs) {
    require_same_dtype(xs[0], x, "concat_rows");
    const int64_t r = x.value().rows();
    dispatch(out.dtype(), [&]<typename T>() {
      auto xv = x.value().data<T>();
      auto ov = out.data<T>();
      std::copy_n(xv.data(), r * cols, ov.data() + off * cols);
    });
    parents.push_back(x.node());
    offsets.push_back(off);
    off += r;
  }
  return make_node(std::move(out), std::move(parents), [cols, offsets](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      for (size_t k = 0; k < n.parents.size(); ++k) {
        Node* p = n.parents[k].get();
        if (!p->requires_grad) continue;
        const int64_t r = p->value.rows(), o = offsets[k];
        auto gp = p->grad_buffer().data<T>();
        for (int64_t i = 0; i < r * cols; ++i) gp[i] += g[o * cols + i];
      }
    });
  });
}

Var slice_rows(const Var& x, int64_t r0, int64_t n_rows) {
  require(x.value().rank() == 2, "slice_rows: expects rank-2 input");
  require(r0 >= 0 && n_rows >= 0 && r0 + n_rows <= x.value().rows(),
          "slice_rows: range out of bounds");
  const int64_t cols = x.value().cols();
  Tensor out = Tensor::zeros({n_rows, cols}, x.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto xv = x.value().data<T>();
    auto ov = out.data<T>();
    std::copy_n(xv.data() + r0 * cols, n_rows * cols, ov.data());
  });
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, r0, cols, n_rows](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto gx = xn->grad_buffer().data<T>();
      for (int64_t i = 0; i < n_rows * cols; ++i) gx[r0 * cols + i] += g[i];
    });
  });
}

Var slice_cols(const Var& x, int64_t c0, int64_t n_cols) {
  require(x.value().rank() == 2, "slice_cols: expects rank-2 input");
  require(c0 >= 0 && n_cols >= 0 && c0 + n_cols <= x.value().cols(),
          "slice_cols: range out of bounds");
  const int64_t rows = x.value().rows(), cols = x.value().cols();
  Tensor out = Tensor::zeros({rows, n_cols}, x.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto xv = x.value().data<T>();
    auto ov = out.data<T>();
    for (int64_t r = 0; r < rows; ++r)
      std::copy_n(xv.data() + r * cols + c0, n_cols, ov.data() + r * n_cols);
  });
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, c0, rows, cols, n_cols](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto gx = xn->grad_buffer().data<T>();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < n_cols; ++j) gx[r * cols + c0 + j] += g[r * n_cols + j];
    });
  });
}

Var gather_rows(const Var& x, std::vector<int64_t> idx) {
  require(x.value().rank() == 2, "gather_rows: expects rank-2 input");
  const int64_t rows = x.value().rows(), cols = x.value().cols();
  for (int64_t i : idx) require(i >= 0 && i < rows, "gather_rows: index out of range");
  const int64_t n_out = static_cast<int64_t>(idx.size());
  Tensor out = Tensor::zeros({n_out, cols}, x.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto xv = x.value().data<T>();
    auto ov = out.data<T>();
    for (int64_t r = 0; r < n_out; ++r)
      std::copy_n(xv.data() + idx[r] * cols, cols, ov.data() + r * cols);
  });
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, idx = std::move(idx), cols](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto gx = xn->grad_buffer().data<T>();
      for (size_t r = 0; r < idx.size(); ++r)
        for (int64_t c = 0; c < cols; ++c) gx[idx[r] * cols + c] += g[r * cols + c];
    });
  });
}

Var segment_max(const Var& x, std::vector<int64_t> segment_ids, int64_t n_segments) {
  require(x.value().rank() == 2, "segment_max: expects rank-2 input");
  require(static_cast<int64_t>(segment_ids.size()) == x.value().rows(),
          "segment_max: one segment id per row required");
  for (int64_t s : segment_ids)
    require(s >= 0 && s < n_segments, "segment_max: segment id out of range");
  const int64_t cols = x.value().cols();
  Tensor out = Tensor::zeros({n_segments, cols}, x.value().dtype());
  // argmax row per (segment, column); -1 marks an empty slot (stays zero).
  auto argmax = std::make_shared<std::vector<int64_t>>(
      static_cast<size_t>(n_segments * cols), int64_t{-1});
  dispatch(out.dtype(), [&]<typename T>() {
    auto xv = x.value().data<T>();
    auto ov = out.data<T>();
    std::vector<bool> seen(static_cast<size_t>(n_segments), false);
    for (size_t r = 0; r < segment_ids.size(); ++r) {
      const int64_t s = segment_ids[r];
      for (int64_t c = 0; c < cols; ++c) {
        const T v = xv[r * cols + c];
        if (!seen[s] || v > ov[s * cols + c]) {
          ov[s * cols + c] = v;
          (*argmax)[s * cols + c] = static_cast<int64_t>(r);
        }
      }
      seen[s] = true;
    }
    for (int64_t s = 0; s < n_segments; ++s)
      if (!seen[s])
        for (int64_t c = 0; c < cols; ++c) ov[s * cols + c] = T(0);
  });
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, argmax, cols](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto gx = xn->grad_buffer().data<T>();
      for (size_t i = 0; i < argmax->size(); ++i) {
        const int64_t r = (*argmax)[i];
        if (r >= 0) gx[r * cols + static_cast<int64_t>(i % cols)] += g[i];
      }
    });
  });
}

Var unfold1d(const Var& x, int64_t k, int64_t pad) {
  require(x.value().rank() == 2, "unfold1d: expects rank-2 input");
  require(k >= 1 && pad >= 0, "unfold1d: bad kernel/padding");
  const int64_t t_len = x.value().rows(), c = x.value().cols();
  if (k > t_len + 2 * pad)
    throw std::invalid_argument("unfold1d: kernel wider than padded sequence");
  const int64_t out_len = t_len + 2 * pad - k + 1;
  Tensor out = Tensor::zeros({out_len, k * c}, x.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto xv = x.value().data<T>();
    auto ov = out.data<T>();
    for (int64_t t = 0; t < out_len; ++t)
      for (int64_t i = 0; i < k; ++i) {
        const int64_t src = t - pad + i;
        if (src >= 0 && src < t_len)
          std::copy_n(xv.data() + src * c, c, ov.data() + t * k * c + i * c);
      }
  });
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, k, pad, t_len, c, out_len](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto gx = xn->grad_buffer().data<T>();
      for (int64_t t = 0; t < out_len; ++t)
        for (int64_t i = 0; i < k; ++i) {
          const int64_t src = t - pad + i;
          if (src < 0 || src >= t_len) continue;
          for (int64_t j = 0; j < c; ++j) gx[src * c + j] += g[t * k * c + i * c + j];
        }
    });
  });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (int64_t i = 0; i < x.value().size(); ++i) acc += x.value().at(i);
  Tensor out = Tensor::scalar(acc, x.value().dtype());
  ensure_finite(out, "sum");
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      const T g = n.grad.data<T>()[0];
      auto gx = xn->grad_buffer().data<T>();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  });
}

Var mean(const Var& x) {
  require(x.value().size() > 0, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
  Tensor out = x.value().reshaped(shape);
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto gx = xn->grad_buffer().data<T>();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  });
}

Var softmax(const Var& logits) {
  require(logits.value().rank() == 1, "softmax: expects rank-1 logits");
  require(logits.value().size() >= 1, "softmax: empty logits");
  const int64_t n_el = logits.value().size();
  Tensor out = Tensor::zeros({n_el}, logits.value().dtype());
  dispatch(out.dtype(), [&]<typename T>() {
    auto z = logits.value().data<T>();
    auto p = out.data<T>();
    T m = z[0];
    for (int64_t i = 1; i < n_el; ++i) m = std::max(m, z[i]);
    T lse = T(0);
    for (int64_t i = 0; i < n_el; ++i) {
      p[i] = std::exp(z[i] - m);
      lse += p[i];
    }
    for (int64_t i = 0; i < n_el; ++i) p[i] /= lse;
  });
  auto ln = logits.node();
  return make_node(std::move(out), {ln}, [ln](Node& n) {
    dispatch(n.value.dtype(), [&]<typename T>() {
      auto g = n.grad.data<T>();
      auto p = n.value.data<T>();
      auto gl = ln->grad_buffer().data<T>();
      T dot = T(0);
      for (size_t i = 0; i < g.size(); ++i) dot += g[i] * p[i];
      for (size_t i = 0; i < g.size(); ++i) gl[i] += p[i] * (g[i] - dot);
    });
  });
}

Var softmax_focal_loss(const Var& logits, int64_t target, double gamma) {
  require(logits.value().rank() == 1, "focal_loss: expects rank-1 logits");
  const int64_t n_cls = logits.value().size();
  require(n_cls >= 1, "focal_loss: empty logits");
  if (target < 0 || target >= n_cls)
    throw std::out_of_range("focal_loss: target index out of range");
  require(gamma >= 0.0, "focal_loss: gamma must be >= 0");

  // Work in double regardless of dtype; the result is a scalar.
  std::vector<double> z = logits.value().to_vector();
  double m = *std::max_element(z.begin(), z.end());
  double lse = 0.0;
  for (double v : z) lse += std::exp(v - m);
  lse = m + std::log(lse);
  const double logp_t = z[static_cast<size_t>(target)] - lse;
  const double p_t = std::exp(logp_t);
  const double loss = -std::pow(1.0 - p_t, gamma) * logp_t;

  Tensor out = Tensor::scalar(loss, logits.value().dtype());
  ensure_finite(out, "focal_loss");
  auto ln = logits.node();
  return make_node(std::move(out), {ln}, [ln, target, gamma, z, lse, p_t, logp_t](Node& n) {
    // dL/dz_i = (delta_it - p_i) * (gamma*(1-p_t)^(gamma-1)*p_t*logp_t - (1-p_t)^gamma)
    const double w = (gamma > 0.0 ? gamma * std::pow(1.0 - p_t, gamma - 1.0) * p_t * logp_t : 0.0) -
                     std::pow(1.0 - p_t, gamma);
    const double g = n.grad.at(0);
    Tensor& gl = ln->grad_buffer();
    for (size_t i = 0; i < z.size(); ++i) {
      const double p_i = std::exp(z[i] - lse);
      const double delta = (static_cast<int64_t>(i) == target) ? 1.0 : 0.0;
      gl.set(static_cast<int64_t>(i), gl.at(static_cast<int64_t>(i)) + g * (delta - p_i) * w);
    }
  });
}

Var huber(const Var& pred, const Tensor& target, double delta) {
  require(pred.value().same_shape(target), "huber: shape mismatch");
  require(delta > 0.0, "huber: delta must be positive");
  const int64_t n_el = pred.value().size();
  require(n_el > 0, "huber: empty tensors");
  Tensor target64 = target.to(Dtype::f64);
  double acc = 0.0;
  for (int64_t i = 0; i < n_el; ++i) {
    const double e = pred.value().at(i) - target64.at(i);
    const double a = std::abs(e);
    acc += a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n_el), pred.value().dtype());
  ensure_finite(out, "huber");
  auto pn = pred.node();
  return make_node(std::move(out), {pn}, [pn, target64, delta, n_el](Node& n) {
    const double g = n.grad.at(0) / static_cast<double>(n_el);
    Tensor& gp = pn->grad_buffer();
    for (int64_t i = 0; i < n_el; ++i) {
      const double e = pn->value.at(i) - target64.at(i);
      gp.set(i, gp.at(i) + g * std::clamp(e, -delta, delta));
    }
  });
}

}  // namespace relcast::ad
