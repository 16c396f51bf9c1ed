#pragma once

#include <optional>
#include <vector>

#include "relcast/autodiff.hpp"

namespace relcast::ad {

struct LinearParams {
  Var w;  // [Din x Dout]
  Var b;  // [Dout]
};

/// Linear layers with ReLU between them (none after the last).
struct MlpParams {
  std::vector<LinearParams> layers;
};

struct Conv1dParams {
  Var w;  // [k*Cin x Cout]
  Var b;  // [Cout]
  int64_t kernel = 3;
  std::optional<LinearParams> skip_proj;  // set when Cin != Cout
};

struct GruParams {
  Var wz, uz, bz;  // update gate (weights candidate)
  Var wr, ur, br;  // reset gate
  Var wn, un, bn;  // candidate
};

/// x [B x Din] -> x*W + b.
Var linear(const Var& x, const LinearParams& p);
Var mlp(const Var& x, const MlpParams& p);
/// Same-length 1D convolution over the row (time) axis plus a skip
/// connection; with an identity kernel and matching widths the output is
/// input + input = 2x the input.
Var conv1d_residual(const Var& x, const Conv1dParams& p);
/// h' = z*n + (1-z)*h with n the candidate state. `hidden` [B x H],
/// `input` [B x Din].
Var gru_cell(const Var& hidden, const Var& input, const GruParams& p);

}  // namespace relcast::ad
