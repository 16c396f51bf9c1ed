#include "relcast/layers.hpp"

#include <stdexcept>

namespace relcast::ad {

Var linear(const Var& x, const LinearParams& p) {
  return add_bias(matmul(x, p.w), p.b);
}

Var mlp(const Var& x, const MlpParams& p) {
  if (p.layers.empty()) throw std::invalid_argument("mlp: empty layer spec");
  Var h = x;
  for (size_t i = 0; i < p.layers.size(); ++i) {
    h = linear(h, p.layers[i]);
    if (i + 1 < p.layers.size()) h = relu(h);
  }
  return h;
}

Var conv1d_residual(const Var& x, const Conv1dParams& p) {
  const int64_t pad = (p.kernel - 1) / 2;
  if (p.kernel % 2 == 0) throw std::invalid_argument("conv1d: kernel size must be odd");
  Var y = add_bias(matmul(unfold1d(x, p.kernel, pad), p.w), p.b);
  Var skip = p.skip_proj ? linear(x, *p.skip_proj) : x;
  return add(y, skip);
}

Var gru_cell(const Var& hidden, const Var& input, const GruParams& p) {
  Var z = sigmoid(add_bias(add(matmul(input, p.wz), matmul(hidden, p.uz)), p.bz));
  Var r = sigmoid(add_bias(add(matmul(input, p.wr), matmul(hidden, p.ur)), p.br));
  Var n = tanh_op(add_bias(add(matmul(input, p.wn), mul(r, matmul(hidden, p.un))), p.bn));
  // z saturates to 1 -> candidate, to 0 -> previous hidden.
  Var keep = sub(constant(Tensor::full(z.value().shape(), 1.0, z.value().dtype())), z);
  return add(mul(z, n), mul(keep, hidden));
}

}  // namespace relcast::ad
