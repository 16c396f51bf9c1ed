#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "relcast/autodiff.hpp"
#include "relcast/checkpoint.hpp"
#include "relcast/layers.hpp"
#include "relcast/param_store.hpp"
#include "testutil.hpp"

using namespace relcast;
using namespace relcast::ad;
using testutil::finite_diff_check;
using testutil::random_tensor;

TEST_CASE("tensor basics and dtype round trip") {
  Tensor t = Tensor::of({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
  Tensor f = t.to(Dtype::f32);
  CHECK(f.dtype() == Dtype::f32);
  CHECK(f.at(0, 1) == 2.0);
  CHECK_THROWS(Tensor::of({2, 2}, {1, 2, 3}));
}

TEST_CASE("linear: identity, bias broadcast, matmul oracle") {
  Rng rng(7);
  LinearParams p;
  p.w = leaf(Tensor::of({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  p.b = leaf(Tensor::zeros({3}));
  Tensor x = random_tensor({4, 3}, rng);
  CHECK(testutil::max_abs_diff(linear(constant(x), p).value(), x) == 0.0);

  // zero input, bias b -> b on every row
  p.b = leaf(Tensor::of({3}, {0.5, -1.0, 2.0}));
  Var out = linear(constant(Tensor::zeros({2, 3})), p);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) CHECK(out.value().at(r, c) == p.b.value().at(c));

  // random 3x2 against a hand-rolled matmul
  Tensor a = random_tensor({3, 2}, rng);
  Tensor w = random_tensor({2, 4}, rng);
  Var got = matmul(constant(a), constant(w));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 2; ++k) acc += a.at(i, k) * w.at(k, j);
      CHECK(got.value().at(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
  CHECK_THROWS(matmul(constant(a), constant(random_tensor({3, 4}, rng))));
}

TEST_CASE("mlp: single layer equals linear, relu clamps, gradient vs finite differences") {
  Rng rng(11);
  MlpParams p1;
  p1.layers.push_back({leaf(random_tensor({3, 2}, rng)), leaf(random_tensor({2}, rng))});
  Tensor x = random_tensor({5, 3}, rng);
  CHECK(testutil::max_abs_diff(mlp(constant(x), p1).value(),
                               linear(constant(x), p1.layers[0]).value()) == 0.0);

  MlpParams empty;
  CHECK_THROWS(mlp(constant(x), empty));

  // all-negative pre-activations -> zeros after relu
  Var neg = constant(Tensor::full({2, 3}, -5.0));
  Var r = relu(neg);
  for (int64_t i = 0; i < r.value().size(); ++i) CHECK(r.value().at(i) == 0.0);

  // 2-layer gradient check
  auto loss_fn = [&x](const std::vector<Var>& ps) {
    MlpParams p;
    p.layers.push_back({ps[0], ps[1]});
    p.layers.push_back({ps[2], ps[3]});
    return mean(mul(mlp(constant(x), p), mlp(constant(x), p)));
  };
  std::vector<Var> leaves = {
      leaf(random_tensor({3, 4}, rng)), leaf(random_tensor({4}, rng)),
      leaf(random_tensor({4, 2}, rng)), leaf(random_tensor({2}, rng))};
  CHECK(finite_diff_check(loss_fn, leaves) < 1e-6);
}

TEST_CASE("conv1d_residual: identity kernel doubles input, averaging kernel, oracle") {
  // centered identity kernel, Cin == Cout == 1, k=3
  Conv1dParams p;
  p.kernel = 3;
  p.w = leaf(Tensor::of({3, 1}, {0, 1, 0}));
  p.b = leaf(Tensor::zeros({1}));
  Tensor x = Tensor::of({4, 1}, {1, 2, 3, 4});
  Var out = conv1d_residual(constant(x), p);
  for (int64_t i = 0; i < 4; ++i) CHECK(out.value().at(i) == 2.0 * x.at(i));

  // constant input + averaging kernel stays constant (interior rows)
  Conv1dParams avg;
  avg.kernel = 3;
  avg.w = leaf(Tensor::of({3, 1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
  avg.b = leaf(Tensor::zeros({1}));
  Tensor cx = Tensor::full({6, 1}, 2.5);
  Var avg_out = conv1d_residual(constant(cx), avg);
  for (int64_t i = 1; i < 5; ++i) CHECK(avg_out.value().at(i) == doctest::Approx(5.0));

  // random case vs a naive sliding-window oracle (conv part only)
  Rng rng(3);
  Tensor seq = random_tensor({7, 2}, rng);
  Tensor w = random_tensor({6, 3}, rng);  // k=3, Cin=2, Cout=3
  Var conv = matmul(unfold1d(constant(seq), 3, 1), constant(w));
  for (int64_t t = 0; t < 7; ++t)
    for (int64_t o = 0; o < 3; ++o) {
      double acc = 0.0;
      for (int64_t i = 0; i < 3; ++i) {
        const int64_t src = t - 1 + i;
        if (src < 0 || src >= 7) continue;
        for (int64_t c = 0; c < 2; ++c) acc += seq.at(src, c) * w.at(i * 2 + c, o);
      }
      CHECK(conv.value().at(t, o) == doctest::Approx(acc).epsilon(1e-12));
    }

  CHECK_THROWS(unfold1d(constant(Tensor::zeros({2, 1})), 5, 1));
}

TEST_CASE("gru_cell: gate saturation limits and gradient") {
  Rng rng(13);
  const int64_t h_dim = 3, in_dim = 2;
  auto make = [&](double bz) {
    GruParams g;
    g.wz = leaf(random_tensor({in_dim, h_dim}, rng));
    g.uz = leaf(random_tensor({h_dim, h_dim}, rng));
    g.bz = leaf(Tensor::full({h_dim}, bz));
    g.wr = leaf(random_tensor({in_dim, h_dim}, rng));
    g.ur = leaf(random_tensor({h_dim, h_dim}, rng));
    g.br = leaf(Tensor::zeros({h_dim}));
    g.wn = leaf(random_tensor({in_dim, h_dim}, rng));
    g.un = leaf(random_tensor({h_dim, h_dim}, rng));
    g.bn = leaf(Tensor::zeros({h_dim}));
    return g;
  };
  Tensor h0 = random_tensor({1, h_dim}, rng);
  Tensor x = random_tensor({1, in_dim}, rng);

  // update gate forced to 1 -> output ~= candidate state
  GruParams open = make(50.0);
  Var out = gru_cell(constant(h0), constant(x), open);
  Var r = sigmoid(add_bias(add(matmul(constant(x), open.wr), matmul(constant(h0), open.ur)),
                           open.br));
  Var cand = tanh_op(add_bias(
      add(matmul(constant(x), open.wn), mul(r, matmul(constant(h0), open.un))), open.bn));
  CHECK(testutil::max_abs_diff(out.value(), cand.value()) < 1e-12);

  // update gate forced to 0 -> output ~= previous hidden
  GruParams closed = make(-50.0);
  Var out0 = gru_cell(constant(h0), constant(x), closed);
  CHECK(testutil::max_abs_diff(out0.value(), h0) < 1e-12);

  // output stays within the gates' reachable range
  CHECK(out.value().all_finite());
  for (int64_t i = 0; i < h_dim; ++i)
    CHECK(std::abs(out.value().at(i)) <= std::max(std::abs(h0.at(i)), 1.0) + 1e-12);

  // gradient vs finite differences through all nine parameter tensors
  // (wz/wr/wn [in,h], uz/ur/un [h,h], biases [h])
  std::vector<Var> leaves = {
      leaf(random_tensor({in_dim, h_dim}, rng)), leaf(random_tensor({h_dim, h_dim}, rng)),
      leaf(random_tensor({h_dim}, rng)),         leaf(random_tensor({in_dim, h_dim}, rng)),
      leaf(random_tensor({h_dim, h_dim}, rng)),  leaf(random_tensor({h_dim}, rng)),
      leaf(random_tensor({in_dim, h_dim}, rng)), leaf(random_tensor({h_dim, h_dim}, rng)),
      leaf(random_tensor({h_dim}, rng))};
  auto loss_fn = [&](const std::vector<Var>& ps) {
    GruParams g{ps[0], ps[1], ps[2], ps[3], ps[4], ps[5], ps[6], ps[7], ps[8]};
    return mean(gru_cell(constant(h0), constant(x), g));
  };
  CHECK(finite_diff_check(loss_fn, leaves) < 1e-6);
}

TEST_CASE("segment_max: identity, permutation invariance, loop oracle, empty segments") {
  Rng rng(17);
  Tensor x = random_tensor({6, 3}, rng);
  std::vector<int64_t> one_per = {0, 1, 2, 3, 4, 5};
  CHECK(testutil::max_abs_diff(segment_max(constant(x), one_per, 6).value(), x) == 0.0);

  std::vector<int64_t> seg = {0, 1, 0, 2, 1, 0};
  Var a = segment_max(constant(x), seg, 4);
  // permute rows within segments
  std::vector<int64_t> perm = {5, 4, 2, 3, 1, 0};
  Tensor xp = Tensor::zeros({6, 3});
  std::vector<int64_t> segp(6);
  for (int64_t r = 0; r < 6; ++r) {
    for (int64_t c = 0; c < 3; ++c) xp.set(r, c, x.at(perm[r], c));
    segp[r] = seg[perm[r]];
  }
  Var b = segment_max(constant(xp), segp, 4);
  CHECK(testutil::max_abs_diff(a.value(), b.value()) == 0.0);

  // loop oracle + empty segment 3 yields zeros
  for (int64_t s = 0; s < 4; ++s)
    for (int64_t c = 0; c < 3; ++c) {
      double best = 0.0;
      bool seen = false;
      for (int64_t r = 0; r < 6; ++r)
        if (seg[r] == s) {
          best = seen ? std::max(best, x.at(r, c)) : x.at(r, c);
          seen = true;
        }
      CHECK(a.value().at(s, c) == (seen ? best : 0.0));
    }

  // gradient routes to argmax rows only
  auto loss_fn = [&seg](const std::vector<Var>& ps) {
    return sum(segment_max(ps[0], seg, 4));
  };
  CHECK(finite_diff_check(loss_fn, {leaf(random_tensor({6, 3}, rng))}) < 1e-6);
}

TEST_CASE("softmax focal loss: CE reduction, closed form, vanishing at p=1") {
  // gamma = 0 equals cross-entropy
  Tensor z = Tensor::of({3}, {0.3, -1.2, 0.7});
  Var ce = softmax_focal_loss(leaf(z), 2, 0.0);
  double lse = 0.0;
  for (int64_t i = 0; i < 3; ++i) lse += std::exp(z.at(i));
  CHECK(ce.value().at(0) == doctest::Approx(-(z.at(2) - std::log(lse))).epsilon(1e-12));

  // equal logits, N=2, gamma=2 -> 0.25 * ln 2
  Var fl = softmax_focal_loss(leaf(Tensor::of({2}, {1.0, 1.0})), 0, 2.0);
  CHECK(fl.value().at(0) == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));

  // p_t -> 1 drives the loss to ~0
  Var sure = softmax_focal_loss(leaf(Tensor::of({2}, {30.0, -30.0})), 0, 2.0);
  CHECK(sure.value().at(0) < 1e-12);

  CHECK_THROWS(softmax_focal_loss(leaf(Tensor::of({2}, {0.0, 0.0})), 5, 2.0));

  // gradient for a few gammas
  Rng rng(23);
  for (double gamma : {0.0, 1.0, 2.0}) {
    auto loss_fn = [gamma](const std::vector<Var>& ps) {
      return softmax_focal_loss(ps[0], 1, gamma);
    };
    CHECK(finite_diff_check(loss_fn, {leaf(random_tensor({5}, rng))}) < 1e-5);
  }
}

TEST_CASE("huber: zero at equality, branch continuity, piecewise oracle, gradient") {
  Rng rng(29);
  Tensor t = random_tensor({4, 2}, rng);
  CHECK(huber(constant(t), t, 1.0).value().at(0) == 0.0);

  // |err| == delta: the two branches agree
  const double delta = 0.7;
  const double quad = 0.5 * delta * delta;
  const double lin = delta * (delta - 0.5 * delta);
  CHECK(quad == doctest::Approx(lin).epsilon(1e-15));

  Tensor pred = random_tensor({5, 3}, rng, -2.0, 2.0);
  Tensor target = random_tensor({5, 3}, rng, -2.0, 2.0);
  double acc = 0.0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const double e = std::abs(pred.at(i) - target.at(i));
    acc += e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
  }
  CHECK(huber(constant(pred), target, delta).value().at(0) ==
        doctest::Approx(acc / pred.size()).epsilon(1e-12));
  CHECK_THROWS(huber(constant(pred), random_tensor({2, 2}, rng), delta));

  auto loss_fn = [&](const std::vector<Var>& ps) { return huber(ps[0], target, delta); };
  CHECK(finite_diff_check(loss_fn, {leaf(pred)}) < 1e-5);
}

TEST_CASE("misc op gradients vs finite differences") {
  Rng rng(31);
  Tensor x = random_tensor({4, 3}, rng);
  auto fns = std::vector<std::function<Var(const std::vector<Var>&)>>{
      [](const std::vector<Var>& p) { return mean(relu(p[0])); },
      [](const std::vector<Var>& p) { return mean(sigmoid(p[0])); },
      [](const std::vector<Var>& p) { return mean(tanh_op(p[0])); },
      [](const std::vector<Var>& p) { return mean(mul(p[0], p[0])); },
      [](const std::vector<Var>& p) { return sum(slice_cols(p[0], 1, 2)); },
      [](const std::vector<Var>& p) { return sum(gather_rows(p[0], {2, 0, 2, 3})); },
      [](const std::vector<Var>& p) {
        return sum(concat_cols({p[0], scale(p[0], 2.0)}));
      },
      [](const std::vector<Var>& p) { return sum(unfold1d(p[0], 3, 1)); },
  };
  for (auto& fn : fns) CHECK(finite_diff_check(fn, {leaf(x)}) < 1e-6);

  // softmax gradient
  auto sm = [](const std::vector<Var>& p) {
    return sum(mul(softmax(p[0]), constant(Tensor::of({4}, {0.1, -0.4, 0.7, 0.2}))));
  };
  CHECK(finite_diff_check(sm, {leaf(random_tensor({4}, rng))}) < 1e-5);
}

TEST_CASE("non-finite outputs are rejected") {
  Var big = constant(Tensor::full({2, 2}, 1e308));
  CHECK_THROWS_AS((void)add(big, big), std::runtime_error);
}

TEST_CASE("adam: zero gradients leave parameters, constant gradient converges to lr step") {
  Rng rng(41);
  ParamStore store;
  Var p = store.create("w", {2, 2}, Init::uniform_fan_in, rng);
  Tensor before = p.value();
  store.zero_grad();
  store.adamStep(1e-2);
  CHECK(testutil::max_abs_diff(p.value(), before) == 0.0);

  // single scalar with constant gradient: |step| -> lr
  ParamStore s2;
  Var w = s2.create("x", {1}, Init::zeros, rng);
  const double lr = 1e-3;
  double prev = w.value().at(0);
  double step_mag = 0.0;
  for (int i = 0; i < 500; ++i) {
    s2.zero_grad();
    w.node()->grad_buffer().set(0, 3.7);
    s2.adamStep(lr);
    step_mag = std::abs(w.value().at(0) - prev);
    prev = w.value().at(0);
  }
  CHECK(step_mag == doctest::Approx(lr).epsilon(1e-3));
}

TEST_CASE("lr scheduler decays by 0.25 every 15 epochs") {
  const double base = 5e-4;
  CHECK(scheduled_lr(base, 0) == base);
  CHECK(scheduled_lr(base, 14) == base);
  CHECK(scheduled_lr(base, 15) == doctest::Approx(0.25 * base).epsilon(1e-15));
  CHECK(scheduled_lr(base, 30) == doctest::Approx(0.0625 * base).epsilon(1e-15));
}

TEST_CASE("training-step determinism: same seed, same data, identical parameters") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    LinearParams p{store.create("w", {3, 2}, Init::uniform_fan_in, rng),
                   store.create("b", {2}, Init::zeros, rng)};
    Tensor x = testutil::random_tensor({4, 3}, rng);
    Tensor y = testutil::random_tensor({4, 2}, rng);
    for (int step = 0; step < 20; ++step) {
      store.zero_grad();
      Var loss = huber(linear(constant(x), p), y, 1.0);
      backward(loss);
      store.adamStep(1e-2);
    }
    std::vector<double> out = p.w.value().to_vector();
    auto b = p.b.value().to_vector();
    out.insert(out.end(), b.begin(), b.end());
    return out;
  };
  auto a = run(123), b = run(123), c = run(124);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("checkpoint round trip is bit exact, optimizer state optional") {
  Rng rng(55);
  ParamStore store;
  store.create("layer1.w", {4, 3}, Init::uniform_fan_in, rng);
  store.create("layer1.b", {3}, Init::uniform_fan_in, rng);
  Var w = store.get("layer1.w");
  store.zero_grad();
  for (int64_t i = 0; i < w.value().size(); ++i) w.node()->grad_buffer().set(i, 0.1 * i);
  store.adamStep(1e-3);

  auto tmp = std::filesystem::temp_directory_path() / "relcast_ckpt_test.bin";
  save_checkpoint(tmp.string(), store, "{\"hidden\":8}", true);
  CheckpointData data = load_checkpoint(tmp.string());
  CHECK(data.metadata_json == "{\"hidden\":8}");
  CHECK(data.has_optimizer_state);
  CHECK(data.step_count == 1);

  ParamStore other;
  Rng rng2(999);
  other.create("layer1.w", {4, 3}, Init::uniform_fan_in, rng2);
  other.create("layer1.b", {3}, Init::uniform_fan_in, rng2);
  restore(other, data);
  CHECK(testutil::max_abs_diff(other.get("layer1.w").value(), w.value()) == 0.0);
  CHECK(other.step_count() == 1);

  // second save produces identical bytes
  auto tmp2 = std::filesystem::temp_directory_path() / "relcast_ckpt_test2.bin";
  save_checkpoint(tmp2.string(), other, "{\"hidden\":8}", true);
  CHECK(fnv1a64_file(tmp.string()) == fnv1a64_file(tmp2.string()));

  std::filesystem::remove(tmp);
  std::filesystem::remove(tmp2);
}

TEST_CASE("f32 tensors flow through ops") {
  Rng rng(60);
  Tensor x = testutil::random_tensor({3, 3}, rng).to(Dtype::f32);
  Tensor w = testutil::random_tensor({3, 2}, rng).to(Dtype::f32);
  Var out = matmul(constant(x), constant(w));
  CHECK(out.value().dtype() == Dtype::f32);
  Var act = relu(out);
  CHECK(act.value().all_finite());
  CHECK_THROWS(add(constant(x), constant(x.to(Dtype::f64))));
}
