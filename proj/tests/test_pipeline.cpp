#include <trecs/pipeline.hpp>

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace trecs;
using Eigen::MatrixXd;

namespace {

double model_distance(const CPModel &a, const CPModel &b) {
  return relative_error(cp_evaluate(a), cp_evaluate(b));
}

std::size_t slice_size(const Dims &d) { return d[0] * d[1]; }

} // namespace

TEST(TrecsComplete, FullySampledReducesToLeurgans) {
  Rng rng(1);
  const Dims dims{6, 6, 6};
  const auto truth = random_cp_model(dims, 3, rng);
  const auto X = cp_evaluate(truth);
  const auto ms =
      make_slice_sampling_set(dims, default_slice_pairs(dims), slice_size(dims), 7).measure(X);
  const auto rep = trecs_complete(ms);
  EXPECT_LT(relative_error(cp_evaluate(rep.model), X), 1e-8);
  EXPECT_EQ(rep.model.rank(), 3u);
  EXPECT_EQ(rep.perContraction.size(), 4u);
  for (const auto &c : rep.perContraction)
    EXPECT_TRUE(c.solve.converged);
  EXPECT_LT(rep.lambdaResidual, 1e-6);
  EXPECT_LT(model_distance(rep.model, leurgans_decompose(X, 5)), 1e-8);
}

TEST(TrecsComplete, RankOneGenerousSamples) {
  Rng rng(2);
  const Dims dims{15, 15, 15};
  const auto X = cp_evaluate(random_cp_model(dims, 1, rng));
  const auto m = static_cast<std::size_t>(0.8 * 225);
  const auto ms = make_slice_sampling_set(dims, default_slice_pairs(dims), m, 3).measure(X);
  const auto rep = trecs_complete(ms);
  EXPECT_LT(relative_error(cp_evaluate(rep.model), X), 1e-6);
  EXPECT_LT(measurement_residual(ms, rep.model), 1e-6);
}

TEST(TrecsComplete, DegenerateSliceIsTypedError) {
  Rng rng(3);
  const Dims dims{6, 6, 6};
  auto f = random_cp_model(dims, 2, rng).factors();
  f[2](0, 1) = 0; // component 1 vanishes from the mode-2 slice at index 0
  const CPModel m(f, Eigen::Vector2d(1.0, 1.5));
  const auto ms =
      make_slice_sampling_set(dims, default_slice_pairs(dims), slice_size(dims), 1)
          .measure(cp_evaluate(m));
  try {
    trecs_complete(ms);
    FAIL() << "expected DegeneracyError";
  } catch (const DegeneracyError &e) {
    EXPECT_EQ(e.mode(), 0);
  }
}

TEST(TrecsComplete, RejectsNonSliceDesigns) {
  Rng rng(4);
  const Dims dims{4, 4, 4};
  const auto X = cp_evaluate(random_cp_model(dims, 1, rng));
  const auto ms = make_gaussian_projection_set(dims, {16, 16}, 1).measure(X);
  EXPECT_THROW(trecs_complete(ms), ArgumentError);
}

TEST(TrecsRecover, GaussianOrderThreeAtThreshold) {
  // n = 10, r = 2, m = ceil(3 r (2n - r)) = 108 per group
  int ok = 0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    Rng rng(derive_seed(11, {t, 0}));
    const Dims dims{10, 10, 10};
    const auto X = cp_evaluate(random_cp_model(dims, 2, rng));
    const auto ms = make_gaussian_projection_set(dims, {108, 108}, derive_seed(11, {t, 1})).measure(X);
    try {
      const auto rep = trecs_recover(ms);
      const double e = relative_error(cp_evaluate(rep.model), X);
      if (e * e < 1e-5) {
        ++ok;
        EXPECT_LT(measurement_residual(ms, rep.model), 1e-6);
        EXPECT_LT(rep.lambdaResidual, 1e-6);
      }
    } catch (const Error &) {
    }
  }
  EXPECT_GE(ok, 9);
}

TEST(TrecsRecover, GaussianOrderFour) {
  int ok = 0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    Rng rng(derive_seed(12, {t, 0}));
    const Dims dims{10, 10, 10, 10};
    const auto X = cp_evaluate(random_cp_model(dims, 2, rng));
    const auto ms =
        make_gaussian_projection_set(dims, {108, 108, 108}, derive_seed(12, {t, 1})).measure(X);
    try {
      const auto rep = trecs_recover(ms);
      if (relative_error(cp_evaluate(rep.model), X) < 1e-5)
        ++ok;
    } catch (const Error &) {
    }
  }
  EXPECT_GE(ok, 9);
}

TEST(TrecsRecover, OtherSeparableDesigns) {
  Rng rng(5);
  const Dims dims{6, 5, 4};
  const auto X = cp_evaluate(random_cp_model(dims, 2, rng));
  const auto r1 = make_rank_one_projection_set(dims, {30, 30}, 2).measure(X);
  EXPECT_LT(relative_error(cp_evaluate(trecs_recover(r1).model), X), 1e-6);
  const auto sk = make_sketch_set(dims, {{6, 5}, {5, 4}}, 3).measure(X);
  EXPECT_LT(relative_error(cp_evaluate(trecs_recover(sk).model), X), 1e-6);
}

TEST(TrecsRecover, ThreadedMatchesSequential) {
  Rng rng(6);
  const Dims dims{8, 8, 8};
  const auto X = cp_evaluate(random_cp_model(dims, 2, rng));
  const auto ms = make_gaussian_projection_set(dims, {80, 80}, 9).measure(X);
  const auto a = trecs_recover(ms, {}, {{}, 1});
  const auto b = trecs_recover(ms, {}, {{}, 4});
  EXPECT_EQ(a.model.weights(), b.model.weights());
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_EQ(a.model.factor(k), b.model.factor(k));
}

TEST(TrecsRecover, UnconvergedSubproblemIsRecoveryError) {
  Rng rng(7);
  const Dims dims{8, 8, 8};
  const auto X = cp_evaluate(random_cp_model(dims, 3, rng));
  const auto ms = make_gaussian_projection_set(dims, {20, 20}, 1).measure(X);
  SolverConfig cfg;
  cfg.maxIters = 50;
  EXPECT_THROW(trecs_recover(ms, cfg), RecoveryError);
}

TEST(TrecsRecover, RequiresEveryModePair) {
  Rng rng(8);
  const Dims dims{4, 4, 4, 4};
  const auto X = cp_evaluate(random_cp_model(dims, 1, rng));
  auto ms = make_gaussian_projection_set(dims, {16, 16, 16}, 1).measure(X);
  ms.modes.pop_back();
  EXPECT_THROW(trecs_recover(ms), ArgumentError);
}

TEST(Report, KeyValueSchema) {
  Rng rng(9);
  const Dims dims{5, 5, 5};
  const auto X = cp_evaluate(random_cp_model(dims, 2, rng));
  auto rep = trecs_complete(
      make_slice_sampling_set(dims, default_slice_pairs(dims), 25, 1).measure(X));
  rep.reconstructionError = relative_error(cp_evaluate(rep.model), X);
  std::stringstream ss;
  write_report(ss, rep);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    ASSERT_NE(eq, std::string::npos) << line;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  EXPECT_EQ(kv["format"], "trecs-report-1");
  EXPECT_EQ(kv["rank"], "2");
  EXPECT_EQ(kv["dims"], "5,5,5");
  EXPECT_EQ(kv["contraction.1.2.converged"], "1");
  EXPECT_TRUE(kv.count("mode.0.min_eig_gap"));
  EXPECT_TRUE(kv.count("reconstruction_error"));
  EXPECT_TRUE(kv.count("time.total_s"));
}
