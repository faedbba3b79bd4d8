#include <trecs/decomposition.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace trecs;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DenseTensor vec(const VectorXd &v) { return DenseTensor::from_vector(v); }

DenseTensor weight_vec(std::initializer_list<double> v) {
  return {{v.size()}, std::vector<double>(v)};
}

// Smallest per-column |cosine| between canonical models, all modes.
double min_column_cosine(const CPModel &a, const CPModel &b) {
  double worst = 1;
  for (std::size_t k = 0; k < a.order(); ++k)
    for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(a.rank()); ++l)
      worst = std::min(worst, std::abs(a.factor(k).col(l).dot(b.factor(k).col(l))));
  return worst;
}

double weight_rel_error(const CPModel &a, const CPModel &b) {
  return (a.weights().cwiseAbs() - b.weights().cwiseAbs()).norm() / b.weights().norm();
}

} // namespace

TEST(ContractionPair, RankMismatchIsDegeneracy) {
  Rng rng(1);
  const MatrixXd A = random_normal(5, 2, rng) * random_normal(2, 5, rng);
  const MatrixXd B = random_normal(5, 3, rng) * random_normal(3, 5, rng);
  try {
    ContractionPair p(A, B, 1);
    FAIL() << "expected DegeneracyError";
  } catch (const DegeneracyError &e) {
    EXPECT_EQ(e.mode(), 1);
  }
  EXPECT_THROW(ContractionPair(A, MatrixXd::Zero(5, 4), 0), ShapeError);
}

TEST(FactorsFromPair, RankOne) {
  Rng rng(2);
  const VectorXd u = random_normal(4, rng), v = random_normal(3, rng);
  const ContractionPair p(2.0 * u * v.transpose(), -0.5 * u * v.transpose(), 0);
  const auto f = factors_from_pair(p);
  ASSERT_EQ(f.left.cols(), 1);
  EXPECT_NEAR(std::abs(f.left.col(0).dot(u.normalized())), 1, 1e-12);
  EXPECT_NEAR(std::abs(f.right.col(0).dot(v.normalized())), 1, 1e-12);
  EXPECT_NEAR(f.pairingEigenvalues(0), -4, 1e-10);
}

TEST(FactorsFromPair, AnalyticRatioExample) {
  Rng rng(3);
  const Eigen::HouseholderQR<MatrixXd> qu(random_normal(4, 4, rng)), qv(random_normal(5, 5, rng));
  const MatrixXd U = MatrixXd(qu.householderQ()).leftCols(2);
  const MatrixXd V = MatrixXd(qv.householderQ()).leftCols(2);
  const MatrixXd W = MatrixXd::Identity(2, 2);
  DenseTensor X({4, 5, 2});
  for (Eigen::Index l = 0; l < 2; ++l)
    X = X + outer_tensor({vec(U.col(l)), vec(V.col(l)), vec(W.col(l))}) * double(l + 1);
  const ContractionPair p(contract(X, mode_pair(0), weight_vec({1, 2})),
                          contract(X, mode_pair(0), weight_vec({2, 1})), 0);
  const auto f = factors_from_pair(p);
  // <w_l, a> / <w_l, b> = {1/2, 2}, descending
  ASSERT_EQ(f.pairingEigenvalues.size(), 2);
  EXPECT_NEAR(f.pairingEigenvalues(0), 2.0, 2.0 * 1e-8);
  EXPECT_NEAR(f.pairingEigenvalues(1), 0.5, 0.5 * 1e-8);
  EXPECT_GT(std::abs(f.left.col(0).dot(U.col(1))), 1 - 1e-8);
  EXPECT_GT(std::abs(f.left.col(1).dot(U.col(0))), 1 - 1e-8);
  EXPECT_GT(std::abs(f.right.col(0).dot(V.col(1))), 1 - 1e-8);
  EXPECT_GT(std::abs(f.right.col(1).dot(V.col(0))), 1 - 1e-8);
}

TEST(FactorsFromPair, RandomRankThree) {
  Rng rng(4);
  const auto truth = random_cp_model({8, 8, 8}, 3, rng);
  const auto X = cp_evaluate(truth);
  const VectorXd a = random_normal(8, rng).normalized(), b = random_normal(8, rng).normalized();
  const auto f = factors_from_pair(
      ContractionPair(contract(X, mode_pair(0), vec(a)), contract(X, mode_pair(0), vec(b)), 0));
  ASSERT_EQ(f.left.cols(), 3);
  const auto aligned = align_factors(truth.factor(0), f);
  const MatrixXd &W = truth.factor(2);
  for (Eigen::Index l = 0; l < 3; ++l) {
    EXPECT_GT(aligned.left.col(l).dot(truth.factor(0).col(l)), 1 - 1e-8);
    EXPECT_GT(std::abs(aligned.right.col(l).dot(truth.factor(1).col(l))), 1 - 1e-8);
    const double ratio = W.col(l).dot(a) / W.col(l).dot(b);
    EXPECT_NEAR(aligned.pairingEigenvalues(l), ratio, 1e-8 * std::abs(ratio));
  }
}

TEST(FactorsFromPair, EqualRatiosAreNonGeneric) {
  Rng rng(5);
  const MatrixXd U = random_normal(4, 2, rng), V = random_normal(4, 2, rng);
  const VectorXd w = random_normal(3, rng);
  DenseTensor X({4, 4, 3});
  for (Eigen::Index l = 0; l < 2; ++l)
    X = X + outer_tensor({vec(U.col(l)), vec(V.col(l)), vec(w)});
  // both components share w, so every contraction pair gives equal ratios
  const VectorXd a = random_normal(3, rng), b = random_normal(3, rng);
  try {
    factors_from_pair(
        ContractionPair(contract(X, mode_pair(0), vec(a)), contract(X, mode_pair(0), vec(b)), 0));
    FAIL() << "expected GenericityError";
  } catch (const GenericityError &e) {
    EXPECT_EQ(e.mode(), 0);
  } catch (const DegeneracyError &) {
    // rank collapse of the contraction is an acceptable typed failure too
  }
  EXPECT_THROW(leurgans_decompose(X, 1), Error);
}

TEST(AlignFactors, AlreadyAligned) {
  Rng rng(6);
  ModeFactors c{random_normal(5, 3, rng), random_normal(4, 3, rng), Eigen::Vector3d(3, 2, 1), 0.3};
  const auto out = align_factors(c.left, c);
  EXPECT_EQ(out.left, c.left);
  EXPECT_EQ(out.right, c.right);
  EXPECT_EQ(out.pairingEigenvalues, c.pairingEigenvalues);
}

TEST(AlignFactors, ReversedWithSignFlip) {
  Rng rng(7);
  const MatrixXd ref = random_normal(4, 2, rng);
  const MatrixXd right = random_normal(3, 2, rng);
  ModeFactors c;
  c.left.resize(4, 2);
  c.right.resize(3, 2);
  c.left << ref.col(1), -ref.col(0);
  c.right << right.col(1), -right.col(0);
  c.pairingEigenvalues = Eigen::Vector2d(5, 7);
  const auto out = align_factors(ref, c);
  EXPECT_EQ(out.left, ref);
  EXPECT_EQ(out.right, right);
  EXPECT_EQ(out.pairingEigenvalues, Eigen::Vector2d(7, 5));
}

TEST(AlignFactors, MatchesExhaustiveSignedPermutationSearch) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd ref = random_normal(6, 4, rng);
    ref.colwise().normalize();
    std::vector<Eigen::Index> perm(4);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::uniform_int_distribution<int> coin(0, 1);
    ModeFactors c{MatrixXd(6, 4), MatrixXd(6, 4), VectorXd(4), 0};
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double s = coin(rng) ? 1 : -1;
      c.left.col(j) = s * ref.col(perm[static_cast<std::size_t>(j)]);
      c.right.col(j) = c.left.col(j);
      c.pairingEigenvalues(j) = double(j);
    }
    // oracle: best of all 4! * 2^4 signed permutations by total cosine
    std::vector<Eigen::Index> p(4);
    std::iota(p.begin(), p.end(), Eigen::Index{0});
    double best = -1e300;
    MatrixXd best_left;
    do {
      for (int signs = 0; signs < 16; ++signs) {
        MatrixXd cand(6, 4);
        double score = 0;
        for (Eigen::Index i = 0; i < 4; ++i) {
          const double s = (signs >> i) & 1 ? -1 : 1;
          cand.col(i) = s * c.left.col(p[static_cast<std::size_t>(i)]);
          score += cand.col(i).dot(ref.col(i));
        }
        if (score > best) {
          best = score;
          best_left = cand;
        }
      }
    } while (std::next_permutation(p.begin(), p.end()));
    const auto out = align_factors(ref, c);
    EXPECT_LT((out.left - best_left).norm(), 1e-14);
    EXPECT_LT((out.left - ref).norm(), 1e-14);
  }
}

TEST(AlignFactors, InconsistentSetsRejected) {
  ModeFactors c{MatrixXd::Identity(4, 2), MatrixXd::Identity(4, 2), VectorXd::Ones(2), 0};
  MatrixXd ref = MatrixXd::Zero(4, 2);
  ref(2, 0) = 1;
  ref(3, 1) = 1;
  EXPECT_THROW(align_factors(ref, c), AlignmentError);
}

TEST(Leurgans, RankOne) {
  Rng rng(9);
  const VectorXd u = random_normal(3, rng).normalized(), v = random_normal(4, rng).normalized(),
                 w = random_normal(5, rng).normalized();
  const auto X = outer_tensor({vec(u), vec(v), vec(w)}) * 2.0;
  const auto m = leurgans_decompose(X, 0);
  ASSERT_EQ(m.rank(), 1u);
  EXPECT_NEAR(std::abs(m.weights()(0)), 2.0, 1e-10);
  EXPECT_LT(relative_error(cp_evaluate(m), X), 1e-10);
}

TEST(Leurgans, OrderThreeRankFive) {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto truth = random_cp_model({20, 20, 20}, 5, rng);
    const auto X = cp_evaluate(truth);
    const auto m = leurgans_decompose(X, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(m.rank(), 5u);
    EXPECT_LT(relative_error(cp_evaluate(m), X), 1e-8);
    EXPECT_GT(min_column_cosine(m, truth), 1 - 1e-8);
    EXPECT_LT(weight_rel_error(m, truth), 1e-8);
  }
}

TEST(Leurgans, OrderFour) {
  Rng rng(11);
  const auto truth = random_cp_model({8, 7, 8, 6}, 2, rng);
  const auto X = cp_evaluate(truth);
  const auto m = leurgans_decompose(X, 3);
  EXPECT_LT(relative_error(cp_evaluate(m), X), 1e-8);
  EXPECT_GT(min_column_cosine(m, truth), 1 - 1e-8);
}

TEST(Leurgans, InvariantToSeed) {
  Rng rng(12);
  const auto X = cp_evaluate(random_cp_model({9, 8, 7}, 4, rng));
  const auto a = leurgans_decompose(X, 1), b = leurgans_decompose(X, 999);
  EXPECT_GT(min_column_cosine(a, b), 1 - 1e-8);
  EXPECT_LT((a.weights() - b.weights()).norm(), 1e-8 * a.weights().norm());
}

TEST(Leurgans, ZeroTensorGivesRankZero) {
  const auto m = leurgans_decompose(DenseTensor({3, 3, 3}), 0);
  EXPECT_EQ(m.rank(), 0u);
}

TEST(Leurgans, NeedsOrderThree) {
  EXPECT_THROW(leurgans_decompose(DenseTensor::from_matrix(MatrixXd::Identity(3, 3)), 0),
               ShapeError);
}
