#include <doctest.h>

#include <cmath>

#include "vhl/autodiff.hpp"
#include "vhl/rng.hpp"

using namespace vhl;
using ad::Tape;
using ad::Var;

namespace {

// Central finite difference of a scalar function of one leaf entry.
template <typename Fn>
double fd(Fn fn, ad::Mat& leaf_value, long r, long c, double h = 1e-6) {
  const double saved = leaf_value(r, c);
  leaf_value(r, c) = saved + h;
  const double up = fn();
  leaf_value(r, c) = saved - h;
  const double down = fn();
  leaf_value(r, c) = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("tape gradients match finite differences through a small network") {
  Rng rng(11);
  ad::Mat w(3, 4), x(4, 1), b(3, 1);
  for (long i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1, 1);
  for (long i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  for (long i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-1, 1);

  auto loss_value = [&]() {
    Tape t;
    Var vw = t.leaf(w, true);
    Var vx = t.leaf(x, true);
    Var vb = t.leaf(b, true);
    Var y = t.tanh(t.add(t.matvec(vw, vx), vb));
    Var z = t.sigmoid(t.scale(y, 2.0));
    Var logits = t.concat({z, y});
    return t.value(t.cross_entropy(logits, 2))(0, 0);
  };

  Tape t;
  Var vw = t.leaf(w, true);
  Var vx = t.leaf(x, true);
  Var vb = t.leaf(b, true);
  Var y = t.tanh(t.add(t.matvec(vw, vx), vb));
  Var z = t.sigmoid(t.scale(y, 2.0));
  Var logits = t.concat({z, y});
  Var loss = t.cross_entropy(logits, 2);
  t.backward(loss);

  for (long r = 0; r < w.rows(); ++r) {
    for (long c = 0; c < w.cols(); ++c) {
      CHECK(t.grad(vw)(r, c) == doctest::Approx(fd(loss_value, w, r, c)).epsilon(1e-5));
    }
  }
  for (long r = 0; r < x.rows(); ++r) {
    CHECK(t.grad(vx)(r, 0) == doctest::Approx(fd(loss_value, x, r, 0)).epsilon(1e-5));
  }
  for (long r = 0; r < b.rows(); ++r) {
    CHECK(t.grad(vb)(r, 0) == doctest::Approx(fd(loss_value, b, r, 0)).epsilon(1e-5));
  }
}

TEST_CASE("softmax does not change under a constant logit shift") {
  Tape t;
  ad::Mat logits(3, 1);
  logits << 0.5, -1.0, 2.0;
  Var a = t.constant(logits);
  Var s1 = t.softmax(a);
  ad::Mat shifted = logits.array() + 7.5;
  Var s2 = t.softmax(t.constant(shifted));
  for (long i = 0; i < 3; ++i) {
    CHECK(t.value(s1)(i, 0) == doctest::Approx(t.value(s2)(i, 0)).epsilon(1e-12));
  }
  double sum = t.value(s1).sum();
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("patch_means forward and backward") {
  Rng rng(5);
  const int w = 8, h = 8, grid = 4;
  ad::Mat pixels(w * h * 3, 1);
  for (long i = 0; i < pixels.size(); ++i) pixels(i, 0) = rng.uniform(0, 1);

  Tape t;
  Var px = t.leaf(pixels, true);
  Var feats = t.patch_means(px, w, h, grid);
  REQUIRE(t.value(feats).rows() == grid * grid * 3);

  // Forward: patch (0,0) channel 0 mean over the 2x2 top-left block.
  double manual = 0.0;
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) manual += pixels((y * w + x) * 3 + 0, 0);
  }
  manual /= 4.0;
  CHECK(t.value(feats)(0, 0) == doctest::Approx(manual).epsilon(1e-12));

  // Backward: weighted-sum loss against finite differences.
  ad::Mat weights(grid * grid * 3, 1);
  for (long i = 0; i < weights.size(); ++i) weights(i, 0) = rng.uniform(-1, 1);
  Var loss = t.dot(feats, t.constant(weights));
  t.backward(loss);

  auto loss_value = [&]() {
    Tape t2;
    Var px2 = t2.leaf(pixels, false);
    Var f2 = t2.patch_means(px2, w, h, grid);
    return t2.value(t2.dot(f2, t2.constant(weights)))(0, 0);
  };
  for (int probe = 0; probe < 20; ++probe) {
    const long i = static_cast<long>(rng.uniform_index(static_cast<uint64_t>(pixels.size())));
    CHECK(t.grad(px)(i, 0) == doctest::Approx(fd(loss_value, pixels, i, 0)).epsilon(1e-6));
  }
}

TEST_CASE("row_as_col scatters gradient into the right row") {
  Tape t;
  ad::Mat emb(4, 3);
  emb.setZero();
  Var vemb = t.leaf(emb, true);
  Var row = t.row_as_col(vemb, 2);
  Var loss = t.dot(row, row);  // sum of squares of row 2
  t.backward(loss);
  for (long r = 0; r < 4; ++r) {
    for (long c = 0; c < 3; ++c) {
      CHECK(t.grad(vemb)(r, c) == 0.0);  // row is zero so grad 2*x = 0
    }
  }
  ad::Mat emb2(4, 3);
  emb2.setConstant(0.5);
  Tape t2;
  Var v2 = t2.leaf(emb2, true);
  Var row2 = t2.row_as_col(v2, 1);
  t2.backward(t2.dot(row2, row2));
  for (long c = 0; c < 3; ++c) {
    CHECK(t2.grad(v2)(1, c) == doctest::Approx(1.0));
    CHECK(t2.grad(v2)(0, c) == 0.0);
  }
}

TEST_CASE("mean_of and stack_scalars") {
  Tape t;
  std::vector<Var> xs;
  for (int i = 1; i <= 4; ++i) xs.push_back(t.scalar(static_cast<double>(i), true));
  Var mean = t.mean_of(xs);
  CHECK(t.value(mean)(0, 0) == doctest::Approx(2.5));
  Var stacked = t.stack_scalars(xs);
  CHECK(t.value(stacked).rows() == 4);
  Var loss = t.cross_entropy(stacked, 3);
  t.backward(loss);
  CHECK(t.grad(xs[3])(0, 0) < 0.0);  // increasing the target logit lowers loss
}
