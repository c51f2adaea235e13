#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace tea;

namespace {

SparseRowMatrix random_sparse(std::size_t r, std::size_t c, std::uint64_t seed) {
  SparseRowMatrix m(r, c);
  Rng rng(seed, "sparse");
  for (std::size_t i = 0; i < r; ++i) {
    std::vector<SparseEntry> row;
    for (std::size_t j = 0; j < c; ++j)
      if (rng.uniform() < 0.5) row.push_back({j, rng.normal()});
    m.set_row(i, row);
  }
  return m;
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

}  // namespace

TEST(Spmm, IdentityTimesBIsB) {
  SparseRowMatrix eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye.set_row(i, {{i, 1.0}});
  auto b = check::random_matrix(3, 2, 1);
  EXPECT_EQ(spmm(eye, b), b);
}

TEST(Spmm, EmptyRowGivesZeroRow) {
  SparseRowMatrix a(2, 3);
  a.set_row(0, {{1, 2.0}});
  auto out = spmm(a, check::random_matrix(3, 4, 2));
  for (double v : out.row(1)) EXPECT_EQ(v, 0.0);
}

TEST(Spmm, MatchesDenseProduct) {
  auto a = random_sparse(4, 5, 3);
  auto b = check::random_matrix(5, 3, 4);
  auto got = spmm(a, b), want = dense_matmul(a.to_dense(), b);
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got.values()[k], want.values()[k], 1e-12);
}

TEST(Spmm, TransposedMatchesDense) {
  auto a = random_sparse(4, 5, 5);
  auto b = check::random_matrix(4, 3, 6);
  auto ad = a.to_dense();
  DenseMatrix at(5, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) at(j, i) = ad(i, j);
  auto got = spmm_transposed(a, b), want = dense_matmul(at, b);
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got.values()[k], want.values()[k], 1e-12);
}

TEST(Spmm, ShapeMismatchThrows) {
  SparseRowMatrix a(2, 3);
  EXPECT_THROW(spmm(a, DenseMatrix(4, 2)), ShapeError);
}

TEST(SparseRowMatrix, RejectsDuplicateAndOutOfRangeColumns) {
  SparseRowMatrix a(1, 3);
  EXPECT_THROW(a.set_row(0, {{1, 1.0}, {1, 2.0}}), ShapeError);
  EXPECT_THROW(a.set_row(0, {{3, 1.0}}), ShapeError);
}

TEST(Matmul, VariantsAgreeWithLoops) {
  auto a = check::random_matrix(3, 4, 7), b = check::random_matrix(4, 2, 8);
  auto want = dense_matmul(a, b);
  auto got = matmul(a, b);
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got.values()[k], want.values()[k], 1e-12);
  DenseMatrix bt(2, 4), at(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) bt(j, i) = b(i, j);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) at(j, i) = a(i, j);
  auto nt = matmul_nt(a, bt), tn = matmul_tn(at, b);
  for (std::size_t k = 0; k < want.size(); ++k) {
    EXPECT_NEAR(nt.values()[k], want.values()[k], 1e-12);
    EXPECT_NEAR(tn.values()[k], want.values()[k], 1e-12);
  }
}

TEST(RowSoftmax, ConstantRowIsUniform) {
  DenseMatrix m(1, 5, 2.5);
  auto p = row_softmax(m);
  for (double v : p.values()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(RowSoftmax, ZeroAndLogThree) {
  DenseMatrix m(1, 2, std::vector<double>{0.0, std::log(3.0)});
  auto p = row_softmax(m);
  EXPECT_NEAR(p(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.75, 1e-15);
}

TEST(RowSoftmax, MatchesDirectEvaluation) {
  auto r = check::oracle_softmax(20);
  EXPECT_LT(r.max_error, 1e-12);
}

TEST(RowSoftmax, AllNegativeInfinityThrows) {
  const double inf = std::numeric_limits<double>::infinity();
  DenseMatrix m(1, 2, std::vector<double>{-inf, -inf});
  EXPECT_THROW(row_softmax(m), InvalidParameter);
}

TEST(RowSoftmax, NanPropagates) {
  DenseMatrix m(1, 2, std::vector<double>{std::nan(""), 1.0});
  EXPECT_FALSE(row_softmax(m).all_finite());
}

TEST(RowSoftmax, LargeLogitsStayFinite) {
  DenseMatrix m(1, 2, std::vector<double>{1000.0, 999.0});
  auto p = row_softmax(m);
  EXPECT_TRUE(p.all_finite());
  EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Cosine, HandValues) {
  std::vector<double> u{1, 1}, v{1, 0}, w{0, 3};
  EXPECT_NEAR(cosine(u, u), 1.0, 1e-15);
  EXPECT_NEAR(cosine(v, w), 0.0, 1e-15);
  EXPECT_NEAR(cosine(u, v), 0.7071, 1e-4);
  EXPECT_NEAR(cosine(u, v), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Cosine, LengthMismatchThrows) {
  std::vector<double> a{1, 2}, b{1, 2, 3};
  EXPECT_THROW(cosine(a, b), ShapeError);
}

TEST(Cosine, BackwardMatchesFiniteDifferences) {
  std::vector<double> u{0.3, -1.2, 0.7}, v{1.1, 0.4, -0.5};
  std::vector<double> du(3, 0.0), dv(3, 0.0);
  cosine_backward(u, v, 1.0, du, dv);
  for (std::size_t k = 0; k < 3; ++k) {
    auto up = u, dn = u;
    up[k] += 1e-6;
    dn[k] -= 1e-6;
    EXPECT_NEAR(du[k], (cosine(up, v) - cosine(dn, v)) / 2e-6, 1e-8);
    auto vu = v, vd = v;
    vu[k] += 1e-6;
    vd[k] -= 1e-6;
    EXPECT_NEAR(dv[k], (cosine(u, vu) - cosine(u, vd)) / 2e-6, 1e-8);
  }
}

TEST(NormalizeRows, BackwardMatchesFiniteDifferences) {
  auto x = check::random_matrix(3, 4, 9);
  auto up = check::random_matrix(3, 4, 10);
  auto loss = [&] {
    auto y = normalize_rows(x);
    double L = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) L += y.values()[k] * up.values()[k];
    return L;
  };
  auto g = normalize_rows_backward(x, up);
  EXPECT_LT(check::fd_error(x, g, loss), 1e-6);
}

TEST(Rmsprop, ZeroGradientLeavesParams) {
  auto p = check::random_matrix(2, 2, 11);
  auto before = p;
  DenseMatrix g(2, 2);
  RmspropState s;
  rmsprop_step(s, {&p}, {&g});
  EXPECT_EQ(p, before);
}

TEST(Rmsprop, FirstStepMagnitude) {
  DenseMatrix p(1, 1, 1.0), g(1, 1, 0.2);
  RmspropState s{0.01, 0.9, 1e-8, {}};
  rmsprop_step(s, {&p}, {&g});
  EXPECT_NEAR(1.0 - p(0, 0), 0.01 * 0.2 / std::sqrt(0.1 * 0.04 + 1e-8), 1e-14);
}

TEST(Rmsprop, SecondStepIsSmallerForConstantGradient) {
  DenseMatrix p(1, 1, 1.0), g(1, 1, 0.5);
  RmspropState s{0.01, 0.9, 1e-8, {}};
  rmsprop_step(s, {&p}, {&g});
  double first = 1.0 - p(0, 0);
  double before = p(0, 0);
  rmsprop_step(s, {&p}, {&g});
  double second = before - p(0, 0);
  EXPECT_LT(second, first);
  // acc = 0.19 g^2 after two steps
  EXPECT_NEAR(second, 0.01 * 0.5 / std::sqrt(0.19 * 0.25 + 1e-8), 1e-14);
}

TEST(Rmsprop, NanGradientThrows) {
  DenseMatrix p(1, 1, 1.0), g(1, 1, std::nan(""));
  RmspropState s;
  EXPECT_THROW(rmsprop_step(s, {&p}, {&g}), TrainingDiverged);
}

TEST(Dropout, RateZeroIsAllOnes) {
  auto m = dropout_mask(10, 10, 0.0, 1);
  for (double v : m.values()) EXPECT_EQ(v, 1.0);
}

TEST(Dropout, KeptFractionNearExpectation) {
  auto m = dropout_mask(1000, 100, 0.3, 42);
  double kept = 0.0;
  for (double v : m.values()) {
    if (v != 0.0) {
      EXPECT_NEAR(v, 1.0 / 0.7, 1e-15);
      kept += 1.0;
    }
  }
  EXPECT_NEAR(kept / 1e5, 0.7, 0.01);
}

TEST(Dropout, DeterministicPerSeedAndSite) {
  EXPECT_EQ(dropout_mask(20, 5, 0.5, 3, 7), dropout_mask(20, 5, 0.5, 3, 7));
  EXPECT_NE(dropout_mask(20, 5, 0.5, 3, 7), dropout_mask(20, 5, 0.5, 3, 8));
}

TEST(Dropout, RateOneIsInvalid) { EXPECT_THROW(dropout_mask(2, 2, 1.0, 1), InvalidParameter); }

TEST(Rng, StreamsAreKeyedBySite) {
  Rng a(1, "x"), b(1, "x"), c(1, "y");
  for (int i = 0; i < 10; ++i) {
    auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
  }
}

TEST(Rng, NormalMomentsRoughlyStandard) {
  Rng r(5, "moments");
  double s = 0, ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = r.normal();
    s += v;
    ss += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}
