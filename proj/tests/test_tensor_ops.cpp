#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "edgedis/ops.hpp"
#include "edgedis/rng.hpp"
#include "edgedis/sparse.hpp"
#include "edgedis/tensor.hpp"
#include "support/oracles.hpp"

using namespace edgedis;
namespace op = edgedis::ops;

namespace {

Matrix random_matrix(RngStream& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// sum of all entries as a scalar tensor, built from ops only.
Tensor sum_all(Tape& tape, const Tensor& t) {
  Tensor left = tape.constant(Matrix::Ones(1, t.rows()));
  Tensor right = tape.constant(Matrix::Ones(t.cols(), 1));
  return op::matmul(op::matmul(left, t), right);
}

}  // namespace

TEST_CASE("matmul identity and hand product") {
  Tape tape;
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  Tensor tx = tape.leaf(x);
  Tensor id = tape.leaf(Matrix::Identity(2, 2));
  CHECK(op::matmul(id, tx).value().isApprox(x));

  Matrix a(2, 2), b(2, 1);
  a << 1, 2, 3, 4;
  b << 1, 1;
  Tensor prod = op::matmul(tape.leaf(a), tape.leaf(b));
  CHECK(prod.value()(0, 0) == doctest::Approx(3.0));
  CHECK(prod.value()(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tape tape;
  Tensor a = tape.leaf(Matrix::Zero(2, 3));
  Tensor b = tape.leaf(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(op::matmul(a, b), DimensionError);
  CHECK_THROWS_WITH_AS(op::matmul(a, b), doctest::Contains("(2x3)"), DimensionError);
}

TEST_CASE("matmul gradient matches central differences on random 3x3") {
  RngStream rng(7);
  const Matrix a = random_matrix(rng, 3, 3);
  const Matrix b = random_matrix(rng, 3, 3);
  const double err = oracles::fd_max_rel_err(
      {a, b}, [](Tape& t, std::vector<Tensor>& v) { return sum_all(t, op::matmul(v[0], v[1])); });
  CHECK(err < 1e-6);
}

TEST_CASE("leaky_relu values") {
  Tape tape;
  Matrix x(1, 3);
  x << 0.0, -2.0, 3.0;
  const Matrix y = op::leaky_relu(tape.leaf(x), 0.2).value();
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == doctest::Approx(-0.4));
  CHECK(y(0, 2) == doctest::Approx(3.0));
  CHECK_THROWS_AS(op::leaky_relu(tape.leaf(x), 1.5), ConfigError);
}

TEST_CASE("leaky_relu gradient at +-1 matches finite differences") {
  Matrix x(1, 2);
  x << 1.0, -1.0;
  const double err = oracles::fd_max_rel_err(
      {x}, [](Tape& t, std::vector<Tensor>& v) { return sum_all(t, op::leaky_relu(v[0], 0.2)); });
  CHECK(err < 1e-8);
}

TEST_CASE("sigmoid values, symmetry and saturation") {
  Tape tape;
  Matrix x(1, 1);
  x << 0.0;
  CHECK(op::sigmoid(tape.leaf(x)).value()(0, 0) == doctest::Approx(0.5));

  for (double v : {0.5, 3.0}) {
    Matrix pos(1, 1), neg(1, 1);
    pos << v;
    neg << -v;
    const double sp = op::sigmoid(tape.leaf(pos)).value()(0, 0);
    const double sn = op::sigmoid(tape.leaf(neg)).value()(0, 0);
    CHECK(sn == doctest::Approx(1.0 - sp).epsilon(1e-12));
  }

  // Deep saturation must not overflow. exp(-700) is still representable, so
  // the stable branch has to return its exact tiny value; at -1000 the true
  // value lies below the smallest double and the closest representable
  // result is 0.
  Matrix deep(1, 2);
  deep << -700.0, -1000.0;
  const Matrix s = op::sigmoid(tape.leaf(deep)).value();
  CHECK(std::isfinite(s(0, 0)));
  CHECK(s(0, 0) > 0.0);
  CHECK(s(0, 0) <= 1e-300);
  CHECK(std::isfinite(s(0, 1)));
  CHECK(s(0, 1) >= 0.0);
  CHECK(s(0, 1) <= 1e-300);
}

TEST_CASE("sigmoid gradient matches finite differences") {
  Matrix x(1, 3);
  x << -2.0, 0.3, 1.7;
  const double err = oracles::fd_max_rel_err(
      {x}, [](Tape& t, std::vector<Tensor>& v) { return sum_all(t, op::sigmoid(v[0])); });
  CHECK(err < 1e-8);
}

TEST_CASE("concat_cols shapes and empty operand") {
  Tape tape;
  RngStream rng(11);
  const Matrix x = random_matrix(rng, 4, 2);
  Tensor tx = tape.leaf(x);
  Tensor empty = tape.leaf(Matrix(4, 0));
  CHECK(op::concat_cols(tx, empty).value().isApprox(x));

  Tensor a = tape.leaf(Matrix::Zero(3, 2));
  Tensor b = tape.leaf(Matrix::Zero(3, 5));
  Tensor c = op::concat_cols(a, b);
  CHECK(c.rows() == 3);
  CHECK(c.cols() == 7);

  Tensor bad = tape.leaf(Matrix::Zero(4, 2));
  CHECK_THROWS_AS(op::concat_cols(a, bad), DimensionError);
}

TEST_CASE("concat_cols gradient splits the upstream gradient") {
  RngStream rng(3);
  const Matrix a = random_matrix(rng, 3, 2);
  const Matrix b = random_matrix(rng, 3, 4);
  const double err = oracles::fd_max_rel_err({a, b}, [](Tape& t, std::vector<Tensor>& v) {
    Tensor cat = op::concat_cols(v[0], v[1]);
    Tensor scaled = op::mul(cat, t.constant(Matrix::Constant(3, 6, 0.5)));
    return sum_all(t, scaled);
  });
  CHECK(err < 1e-8);
}

TEST_CASE("edge_gather duplicates, identity, and scatter counts") {
  Tape tape;
  RngStream rng(5);
  const Matrix h = random_matrix(rng, 3, 2);
  Tensor th = tape.leaf(h);

  Tensor dup = op::edge_gather(th, {0, 0});
  CHECK(dup.value().row(0).isApprox(h.row(0)));
  CHECK(dup.value().row(1).isApprox(h.row(0)));

  Tensor ident = op::edge_gather(th, {0, 1, 2});
  CHECK(ident.value().isApprox(h));

  Tensor picked = op::edge_gather(th, {0, 0, 1});
  Tensor loss = sum_all(tape, picked);
  tape.backward(loss);
  CHECK(th.grad()(0, 0) == doctest::Approx(2.0));
  CHECK(th.grad()(1, 0) == doctest::Approx(1.0));
  CHECK(th.grad()(2, 0) == doctest::Approx(0.0));

  CHECK_THROWS_WITH_AS(op::edge_gather(th, {0, 5}), doctest::Contains("position 1"), IndexError);
}

TEST_CASE("segment_softmax trivial groups") {
  Tape tape;
  Matrix s1(1, 1);
  s1 << 4.2;
  CHECK(op::segment_softmax(tape.leaf(s1), {0}, 1).value()(0, 0) == doctest::Approx(1.0));

  Matrix s2(2, 1);
  s2 << 1.3, 1.3;
  const Matrix w2 = op::segment_softmax(tape.leaf(s2), {0, 0}, 1).value();
  CHECK(w2(0, 0) == doctest::Approx(0.5));
  CHECK(w2(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("segment_softmax matches exact exponential evaluation") {
  // softmax(1,2) = (e^1, e^2) / (e^1+e^2); frozen from the exp oracle.
  Tape tape;
  Matrix s(2, 1);
  s << 1.0, 2.0;
  const Matrix w = op::segment_softmax(tape.leaf(s), {0, 0}, 1).value();
  CHECK(w(0, 0) == doctest::Approx(0.26894142137).epsilon(1e-5));
  CHECK(w(1, 0) == doctest::Approx(0.73105857863).epsilon(1e-5));
}

TEST_CASE("segment_softmax group sums and range") {
  Tape tape;
  RngStream rng(17);
  const int e = 40, n = 7;
  Matrix s = random_matrix(rng, e, 1, -30.0, 30.0);
  std::vector<int> seg(e);
  for (int i = 0; i < e; ++i) seg[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(n));
  // Guarantee every group is nonempty.
  for (int g = 0; g < n; ++g) seg[static_cast<std::size_t>(g)] = g;
  const Matrix w = op::segment_softmax(tape.leaf(s), seg, n).value();
  std::vector<double> sums(n, 0.0);
  for (int i = 0; i < e; ++i) {
    CHECK(w(i, 0) > 0.0);
    CHECK(w(i, 0) <= 1.0);
    sums[static_cast<std::size_t>(seg[static_cast<std::size_t>(i)])] += w(i, 0);
  }
  for (int g = 0; g < n; ++g) CHECK(sums[static_cast<std::size_t>(g)] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("segment_softmax gradient matches finite differences") {
  RngStream rng(23);
  const Matrix s = random_matrix(rng, 6, 1);
  const std::vector<int> seg{0, 0, 1, 1, 1, 2};
  Matrix c(6, 1);
  c << 0.3, -1.2, 0.7, 2.0, -0.5, 1.1;
  const double err = oracles::fd_max_rel_err({s}, [&](Tape& t, std::vector<Tensor>& v) {
    Tensor w = op::segment_softmax(v[0], seg, 3);
    return sum_all(t, op::mul(w, t.constant(c)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("segment_weighted_sum permutation, isolated node, dense oracle") {
  Tape tape;
  RngStream rng(29);
  // One in-edge per node with unit weights is a row permutation.
  const Matrix msgs = random_matrix(rng, 3, 2);
  Tensor tm = tape.leaf(msgs);
  Tensor w1 = tape.leaf(Matrix::Ones(3, 1));
  const Matrix perm = op::segment_weighted_sum(w1, tm, {2, 0, 1}, 3).value();
  CHECK(perm.row(2).isApprox(msgs.row(0)));
  CHECK(perm.row(0).isApprox(msgs.row(1)));
  CHECK(perm.row(1).isApprox(msgs.row(2)));

  // Node 3 receives nothing.
  const Matrix iso = op::segment_weighted_sum(w1, tm, {0, 1, 1}, 4).value();
  CHECK(iso.row(3).norm() == 0.0);

  // 3-node line graph 0-1-2 (both directions): compare against dense A^T * M
  // where A[u][v] holds the edge weight from u into v.
  const std::vector<int> src{0, 1, 1, 2};
  const std::vector<int> dst{1, 0, 2, 1};
  Matrix weights(4, 1);
  weights << 0.5, 1.5, 2.0, 0.25;
  const Matrix node_msgs = random_matrix(rng, 3, 2);
  Matrix dense = Matrix::Zero(3, 3);
  for (int i = 0; i < 4; ++i)
    dense(src[static_cast<std::size_t>(i)], dst[static_cast<std::size_t>(i)]) = weights(i, 0);
  const Matrix expected = dense.transpose() * node_msgs;

  Tensor tw = tape.leaf(weights);
  Tensor gathered = op::edge_gather(tape.leaf(node_msgs), src);
  const Matrix got = op::segment_weighted_sum(tw, gathered, dst, 3).value();
  CHECK(got.isApprox(expected, 1e-12));
}

TEST_CASE("segment_weighted_sum gradient matches finite differences") {
  RngStream rng(31);
  const Matrix w = random_matrix(rng, 5, 1);
  const Matrix m = random_matrix(rng, 5, 3);
  const std::vector<int> seg{0, 1, 1, 2, 0};
  const double err = oracles::fd_max_rel_err({w, m}, [&](Tape& t, std::vector<Tensor>& v) {
    return sum_all(t, op::segment_weighted_sum(v[0], v[1], seg, 3));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("softmax_cross_entropy uniform, saturated, oracle") {
  Tape tape;
  const std::vector<std::uint8_t> all(4, 1);

  Tensor uniform = tape.leaf(Matrix::Zero(4, 7));
  CHECK(op::softmax_cross_entropy(uniform, {0, 1, 2, 3}, all).item() ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));

  Matrix hot = Matrix::Zero(2, 3);
  hot(0, 1) = 1000.0;
  hot(1, 2) = 1000.0;
  const std::vector<std::uint8_t> both(2, 1);
  CHECK(op::softmax_cross_entropy(tape.leaf(hot), {1, 2}, both).item() < 1e-12);

  RngStream rng(37);
  Matrix logits(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) logits(i, j) = rng.uniform(-3.0, 3.0);
  const std::vector<int> targets{2, 0, 1, 2};
  const double expected = oracles::softmax_nll(logits, targets, all);
  CHECK(op::softmax_cross_entropy(tape.leaf(logits), targets, all).item() ==
        doctest::Approx(expected).epsilon(1e-8));

  const std::vector<std::uint8_t> none(4, 0);
  CHECK_THROWS_AS(op::softmax_cross_entropy(tape.leaf(logits), targets, none), ContractError);
}

TEST_CASE("softmax_cross_entropy gradient matches finite differences") {
  RngStream rng(41);
  Matrix logits(5, 4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) logits(i, j) = rng.uniform(-2.0, 2.0);
  const std::vector<int> targets{0, 3, 1, 2, 0};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0};
  const double err = oracles::fd_max_rel_err({logits}, [&](Tape& t, std::vector<Tensor>& v) {
    return op::softmax_cross_entropy(v[0], targets, mask);
  });
  CHECK(err < 1e-6);
}

TEST_CASE("binary cross entropy floors, limits, oracle") {
  Tape tape;
  Tensor zero = tape.leaf(Matrix::Zero(5, 1));
  CHECK(op::binary_cross_entropy_logits(zero, {1, 0, 1, 0, 1}).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Matrix big(2, 1);
  big << 500.0, -500.0;
  CHECK(op::binary_cross_entropy_logits(tape.leaf(big), {1.0, 0.0}).item() < 1e-9);

  const std::vector<double> logits{0.7, -1.3, 2.2, -0.4};
  const std::vector<double> targets{1.0, 0.0, 0.0, 1.0};
  Matrix lm(4, 1);
  for (int i = 0; i < 4; ++i) lm(i, 0) = logits[static_cast<std::size_t>(i)];
  CHECK(op::binary_cross_entropy_logits(tape.leaf(lm), targets).item() ==
        doctest::Approx(oracles::bernoulli_nll(logits, targets)).epsilon(1e-8));
}

TEST_CASE("binary cross entropy gradient matches finite differences") {
  Matrix lm(3, 1);
  lm << 0.3, -2.0, 1.1;
  const std::vector<double> targets{1.0, 0.0, 1.0};
  const double err = oracles::fd_max_rel_err({lm}, [&](Tape& t, std::vector<Tensor>& v) {
    return op::binary_cross_entropy_logits(v[0], targets);
  });
  CHECK(err < 1e-6);
}

TEST_CASE("linear_cols, matmul_rows, row_dot, sparse path match dense algebra") {
  RngStream rng(43);
  const Matrix h = random_matrix(rng, 4, 3);
  const Matrix w = random_matrix(rng, 5, 6);

  Tape tape;
  Tensor th = tape.leaf(h);
  Tensor tw = tape.leaf(w);
  const Matrix lc = op::linear_cols(th, tw, 2, 5).value();
  CHECK(lc.isApprox(h * w.middleCols(2, 3).transpose(), 1e-12));

  auto sp = std::make_shared<const SparseRows>(SparseRows::from_dense(h));
  const Matrix lcs = op::linear_cols(tape, sp, tw, 2, 5).value();
  CHECK(lcs.isApprox(lc, 1e-12));

  const Matrix a = random_matrix(rng, 4, 2);
  Tensor ta = tape.leaf(a);
  const Matrix mr = op::matmul_rows(ta, tw, 1, 3).value();
  CHECK(mr.isApprox(a * w.middleRows(1, 2), 1e-12));

  const Matrix b = random_matrix(rng, 4, 3);
  Tensor tb = tape.leaf(b);
  const Matrix rd = op::row_dot(th, tb).value();
  for (int i = 0; i < 4; ++i) CHECK(rd(i, 0) == doctest::Approx(h.row(i).dot(b.row(i))));
}

TEST_CASE("gradients of the slice and rowwise helpers match finite differences") {
  RngStream rng(47);
  const Matrix h = random_matrix(rng, 3, 4);
  const Matrix w = random_matrix(rng, 2, 7);
  const double e1 = oracles::fd_max_rel_err({h, w}, [](Tape& t, std::vector<Tensor>& v) {
    return sum_all(t, op::linear_cols(v[0], v[1], 1, 5));
  });
  CHECK(e1 < 1e-6);

  const Matrix a = random_matrix(rng, 3, 2);
  const double e2 = oracles::fd_max_rel_err({a, w}, [](Tape& t, std::vector<Tensor>& v) {
    return sum_all(t, op::matmul_rows(v[0], v[1], 0, 2));
  });
  CHECK(e2 < 1e-6);

  const Matrix x = random_matrix(rng, 4, 3);
  const Matrix y = random_matrix(rng, 4, 3);
  const double e3 = oracles::fd_max_rel_err({x, y}, [](Tape& t, std::vector<Tensor>& v) {
    return sum_all(t, op::row_dot(v[0], v[1]));
  });
  CHECK(e3 < 1e-6);

  // Sparse input path: gradient flows into the weight only.
  const double e4 = oracles::fd_max_rel_err({w}, [&](Tape& t, std::vector<Tensor>& v) {
    auto sp = std::make_shared<const SparseRows>(SparseRows::from_dense(h));
    Tensor out = op::linear_cols(t, sp, v[0], 1, 5);
    // Reuse the tensor twice so the sparse backward also sees fan-out.
    return sum_all(t, op::add(out, out));
  });
  CHECK(e4 < 1e-6);
}

TEST_CASE("gradients accumulate across consumers instead of overwriting") {
  Tape tape;
  Matrix x(2, 2);
  x << 1.0, 2.0, 3.0, 4.0;
  Tensor tx = tape.leaf(x);
  Tensor branch_a = op::scale(tx, 2.0);
  Tensor branch_b = op::mul(tx, tx);
  Tensor loss = op::add(sum_all(tape, branch_a), sum_all(tape, branch_b));
  tape.backward(loss);
  // d/dx (2x + x^2) = 2 + 2x
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(tx.grad()(i, j) == doctest::Approx(2.0 + 2.0 * x(i, j)));
}

TEST_CASE("tape replay is bitwise deterministic") {
  auto run = [] {
    RngStream rng(123);
    Matrix a = random_matrix(rng, 6, 5);
    Matrix b = random_matrix(rng, 5, 4);
    Tape tape;
    Tensor ta = tape.leaf(a);
    Tensor tb = tape.leaf(b);
    Tensor out = op::sigmoid(op::matmul(op::leaky_relu(op::matmul(ta, tb), 0.2), tape.constant(random_matrix(rng, 4, 1))));
    Tensor loss = sum_all(tape, out);
    tape.backward(loss);
    return std::pair<double, double>(loss.item(), ta.grad().sum());
  };
  const auto first = run();
  const auto second = run();
  CHECK(first.first == second.first);
  CHECK(first.second == second.second);
}

TEST_CASE("rewind drops intermediate state but keeps leaves") {
  Tape tape;
  Tensor w = tape.leaf(Matrix::Ones(2, 2));
  const Tape::Mark mark = tape.mark();
  for (int step = 0; step < 3; ++step) {
    Tensor y = op::mul(w, w);
    Tensor loss = sum_all(tape, y);
    tape.backward(loss);
    CHECK(w.grad().sum() == doctest::Approx(8.0));
    tape.rewind(mark);
    tape.zero_grad();
  }
  CHECK(tape.num_tensors() == 1);
}

TEST_CASE("finite-difference property over every differentiable op") {
  // Module-level invariant: random small inputs, rel. err < 1e-4.
  RngStream rng(53);
  for (int trial = 0; trial < 3; ++trial) {
    const Matrix h = random_matrix(rng, 5, 3);
    const Matrix w = random_matrix(rng, 4, 6);
    const std::vector<int> idx{0, 2, 2, 4, 1, 3};
    const std::vector<int> seg{0, 0, 1, 2, 2, 2};
    Matrix gate(6, 1);
    for (int i = 0; i < 6; ++i) gate(i, 0) = rng.uniform(-1.0, 1.0);
    const double err = oracles::fd_max_rel_err({h, w}, [&](Tape& t, std::vector<Tensor>& v) {
      Tensor rows = op::edge_gather(v[0], idx);                    // 6x3
      Tensor proj = op::linear_cols(rows, v[1], 1, 4);             // 6x4
      Tensor act = op::leaky_relu(proj, 0.2);
      Tensor score = op::row_dot(act, op::sigmoid(act));           // 6x1
      Tensor wts = op::segment_softmax(score, seg, 3);
      Tensor agg = op::segment_weighted_sum(wts, rows, seg, 3);    // 3x3
      Tensor cat = op::concat_cols(agg, op::scale(agg, -0.5));
      return sum_all(t, cat);
    });
    CHECK(err < 1e-4);
  }
}
