// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Run the Release build; criteria 3-5 and 10 take minutes.

#include <trecs/trecs.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace trecs;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Order-3 exact decomposition, n = 20, r = 5.
Verdict exact_decomposition() {
  const auto t0 = Clock::now();
  int ok = 0;
  double worst = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng(derive_seed(1, {i}));
    const auto X = cp_evaluate(random_cp_model({20, 20, 20}, 5, rng));
    try {
      const double e = relative_error(cp_evaluate(leurgans_decompose(X, i)), X);
      worst = std::max(worst, e);
      ok += e < 1e-8;
    } catch (const Error &) {
    }
  }
  const double secs = since(t0);
  return {ok >= 49 && secs < 10,
          fmt("%d/50 below 1e-8 (worst %.2e), %.2f s", ok, worst, secs)};
}

// 2. Order-4 decomposition, n = 8, r = 2.
Verdict higher_order_decomposition() {
  int ok = 0;
  double worst = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng rng(derive_seed(2, {i}));
    const auto X = cp_evaluate(random_cp_model({8, 8, 8, 8}, 2, rng));
    try {
      const double e = relative_error(cp_evaluate(leurgans_decompose(X, i)), X);
      worst = std::max(worst, e);
      ok += e < 1e-8;
    } catch (const Error &) {
    }
  }
  return {ok >= 19, fmt("%d/20 below 1e-8 (worst %.2e)", ok, worst)};
}

// 3. Gaussian projections at m = ceil(3 r (2n - r)) = 513, n = 30, r = 3.
Verdict projection_recovery(double &wallPerTrial) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::RecoverProjection;
  cfg.dims = {30, 30, 30};
  cfg.rankGrid = {3};
  cfg.sampleGrid = {SampleSpec::parse("513")};
  cfg.trials = 10;
  cfg.seed = 3;
  const auto t0 = Clock::now();
  const auto res = run_experiment(cfg);
  const double secs = since(t0);
  const auto &row = res.rows.at(0);
  wallPerTrial = row.meanWallTime;
  return {row.successes >= 9 && secs < 300,
          fmt("%zu/10 with relative MSE < 1e-5 (mean MSE %.2e), %.1f s total", row.successes,
              row.meanError, secs)};
}

// 4. Success rate non-decreasing in m for r in {2, 4, 6}.
Verdict phase_monotonicity() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::PhaseSweep;
  cfg.sweepTarget = SweepTarget::Projection;
  cfg.dims = {30, 30, 30};
  cfg.rankGrid = {2, 4, 6};
  cfg.sampleGrid.clear();
  for (const char *s : {"2n", "6n", "10n", "14n", "18n"})
    cfg.sampleGrid.push_back(SampleSpec::parse(s));
  cfg.trials = 10;
  cfg.seed = 4;
  const auto t0 = Clock::now();
  const auto res = run_experiment(cfg);
  bool pass = true;
  std::string table;
  for (std::size_t ri = 0; ri < cfg.rankGrid.size(); ++ri) {
    int inversions = 0;
    double biggest = 0;
    table += fmt(" r=%zu:", cfg.rankGrid[ri]);
    for (std::size_t mi = 0; mi < cfg.sampleGrid.size(); ++mi) {
      const auto &row = res.rows[ri * cfg.sampleGrid.size() + mi];
      table += fmt(" %zu", row.successes);
      if (mi == 0)
        continue;
      const auto &prev = res.rows[ri * cfg.sampleGrid.size() + mi - 1];
      const double drop = (double(prev.successes) - double(row.successes)) / double(row.trials);
      if (drop > 0) {
        ++inversions;
        biggest = std::max(biggest, drop);
      }
    }
    if (inversions > 1 || biggest > 0.1 + 1e-12)
      pass = false;
  }
  return {pass, fmt("successes per m in {2,6,10,14,18}n:%s; %.0f s", table.c_str(), since(t0))};
}

// 5. Completion: sweep per-slice samples until >= 9/10, compare to the bound.
Verdict completion_sweep() {
  const std::size_t n = 30, r = 2;
  const double log2n = std::pow(std::log(double(n)), 2);
  const double bound = 32.0 * double(r) * double(2 * n) * log2n;
  std::string trace;
  const auto t0 = Clock::now();
  for (std::size_t m = 300; m <= n * n; m += 100) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::Complete;
    cfg.dims = {n, n, n};
    cfg.rankGrid = {r};
    cfg.sampleGrid = {SampleSpec{double(m), false}};
    cfg.trials = 10;
    cfg.seed = 5;
    const auto row = run_experiment(cfg).rows.at(0);
    trace += fmt(" %zu:%zu", m, row.successes);
    if (row.successes >= 9) {
      const double c = double(m) / (double(r) * double(2 * n) * log2n);
      return {double(m) <= bound,
              fmt("m*=%zu per slice (%.0f%% of slice), c*=m/(r(n+n)log^2 n)=%.3f, bound %.0f;"
                  " sweep%s; %.0f s",
                  m, 100.0 * double(m) / double(n * n), c, bound, trace.c_str(), since(t0))};
    }
  }
  return {false, fmt("never reached 9/10; sweep%s", trace.c_str())};
}

// 6. apply_tensor vs a brute-force sum over every tensor entry.
Verdict separability() {
  Rng rng(6);
  std::uniform_int_distribution<std::size_t> dim(2, 5), order(3, 4);
  const char *names[] = {"gaussian", "entries", "rankone", "sketch"};
  double worst[4] = {0, 0, 0, 0};
  for (int variant = 0; variant < 4; ++variant) {
    for (int trial = 0; trial < 200; ++trial) {
      Dims dims(order(rng));
      for (auto &n : dims)
        n = dim(rng);
      const std::size_t k = std::uniform_int_distribution<std::size_t>(0, dims.size() - 2)(rng);
      const std::size_t rows = dims[k], cols = dims[k + 1];
      const auto X = DenseTensor(
          dims, [&] {
            const auto v = random_normal(Eigen::Index(detail::checked_volume(dims)), rng);
            return std::vector<double>(v.data(), v.data() + v.size());
          }());
      const Dims wd = remaining_dims(dims, mode_pair(k));
      const auto wv = random_normal(Eigen::Index(detail::checked_volume(wd)), rng);
      const DenseTensor W(wd, std::vector<double>(wv.data(), wv.data() + wv.size()));
      InnerOperator inner;
      switch (variant) {
      case 0:
        inner = GaussianProjection{rows, cols,
                                   std::make_shared<const MatrixXd>(random_normal(
                                       4, Eigen::Index(rows * cols), rng))};
        break;
      case 1: {
        EntrySampling es{rows, cols, {}};
        for (std::size_t a = 0; a < rows; ++a)
          for (std::size_t b = 0; b < cols; ++b)
            if ((a + b) % 2 == 0)
              es.omega.push_back({a, b});
        inner = es;
        break;
      }
      case 2:
        inner = RankOneProjection{random_normal(Eigen::Index(rows), 3, rng),
                                  random_normal(Eigen::Index(cols), 3, rng)};
        break;
      default:
        inner = Sketch{random_normal(2, Eigen::Index(rows), rng),
                       random_normal(3, Eigen::Index(cols), rng)};
      }
      const SeparableOperator op(dims, k, W, inner);
      const VectorXd y = apply_tensor(op, X);
      // y_i = sum over all entries of A_i(a, b) W(rest) X(...), A_i = T^*(e_i)
      std::size_t outer = 1, innerSize = 1;
      for (std::size_t i = 0; i < k; ++i)
        outer *= dims[i];
      for (std::size_t i = k + 2; i < dims.size(); ++i)
        innerSize *= dims[i];
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const MatrixXd A = adjoint_inner(inner, VectorXd::Unit(y.size(), i));
        double s = 0;
        std::size_t lin = 0;
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t a = 0; a < rows; ++a)
            for (std::size_t b = 0; b < cols; ++b)
              for (std::size_t q = 0; q < innerSize; ++q, ++lin)
                s += A(Eigen::Index(a), Eigen::Index(b)) * W.data()[o * innerSize + q] *
                     X.data()[lin];
        worst[variant] = std::max(worst[variant], std::abs(s - y(i)));
      }
    }
  }
  const double w = *std::max_element(worst, worst + 4);
  return {w < 1e-10, fmt("200 pairs each, max |diff| %s=%.1e %s=%.1e %s=%.1e %s=%.1e", names[0],
                         worst[0], names[1], worst[1], names[2], worst[2], names[3], worst[3])};
}

// 7. sigma_{r+1} of every contraction vanishes.
Verdict contraction_rank_bound() {
  double worst = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::size_t r = 1 + i % 5;
    Rng rng(derive_seed(7, {i}));
    const Dims dims{8, 7, 9, 6};
    const auto X = cp_evaluate(random_cp_model(dims, r, rng));
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      const Dims wd = remaining_dims(dims, mode_pair(k));
      const auto wv = random_normal(Eigen::Index(detail::checked_volume(wd)), rng);
      const DenseTensor W(wd, std::vector<double>(wv.data(), wv.data() + wv.size()));
      const auto s = svd(contract(X, mode_pair(k), W)).S;
      worst = std::max(worst, s(Eigen::Index(r)) / s(0));
    }
  }
  return {worst < 1e-9, fmt("100 instances, r=1..5, worst sigma_{r+1}/sigma_1 = %.1e", worst)};
}

// 8. 2x2 completion against a 1-D grid search of the nuclear norm.
Verdict two_by_two() {
  auto nn = [](double x) {
    MatrixXd M(2, 2);
    M << 1, 2, 2, x;
    return nuclear_norm(M);
  };
  double best_x = 0, best = 1e300;
  for (int i = 0; i <= 400000; ++i) {
    const double x = -20 + 40.0 * i / 400000;
    if (const double v = nn(x); v < best) {
      best = v;
      best_x = x;
    }
  }
  const auto out = recover_completion({{0, 0}, {0, 1}, {1, 0}}, Eigen::Vector3d(1, 2, 2), 2, 2);
  const double x = out.Z(1, 1);
  return {out.converged && std::abs(x - best_x) < 1e-3,
          fmt("solver x=%.6f, grid minimizer x=%.6f (nuclear norm %.6f; x=4 gives %.6f)", x,
              best_x, best, nn(4.0))};
}

// 9. A zero factor entry at a designated slice must raise a typed error.
Verdict degeneracy_detection() {
  int typed = 0, wrong = 0;
  int other = 0;
  const Dims dims{10, 10, 10};
  for (std::uint64_t i = 0; i < 10; ++i) {
    Rng rng(derive_seed(9, {i}));
    auto f = random_cp_model(dims, 3, rng).factors();
    // slice 0 of the last mode is the first designated slice of mode pair 0
    f[2](0, Eigen::Index(i % 3)) = 0;
    const CPModel m(f, VectorXd::Ones(3));
    const auto X = cp_evaluate(m);
    const auto ms =
        make_slice_sampling_set(dims, default_slice_pairs(dims), 90, derive_seed(9, {i, 1}))
            .measure(X);
    try {
      const auto rep = trecs_complete(ms);
      ++wrong;
      (void)rep;
    } catch (const DegeneracyError &) {
      ++typed;
    } catch (const Error &) {
      ++other;
    }
  }
  return {typed >= 9, fmt("%d/10 DegeneracyError, %d other errors, %d silent models", typed, other,
                        wrong)};
}

// 10. Wall time per trial and growth with n.
Verdict timing(double projectionWall) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Timing;
  cfg.sweepTarget = SweepTarget::Projection;
  cfg.dims = {1, 1, 1};
  cfg.sizeGrid = {15, 30, 45};
  cfg.rankGrid = {3};
  cfg.sampleGrid = {SampleSpec::parse("18n")};
  cfg.trials = 3;
  cfg.seed = 10;
  const auto res = run_experiment(cfg);
  std::string log;
  bool growing = true;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto &row = res.rows[i];
    log += fmt(" n=%zu m=%zu: %.3f s (%zu/%zu ok)", row.n, row.m, row.meanWallTime,
               row.successes, row.trials);
    if (i > 0 && !(row.meanWallTime > res.rows[i - 1].meanWallTime))
      growing = false;
  }
  const double t30 = res.rows[1].meanWallTime;
  return {projectionWall < 60 && t30 < 60 && growing,
          fmt("n=30 r=3 m=513: %.3f s/trial;%s", projectionWall, log.c_str())};
}

} // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char *name, const std::function<Verdict()> &fn) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception &e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %2d %-34s %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(),
                since(t0));
    std::fflush(stdout);
    failed += !v.pass;
  };
  double projectionWall = 1e300;
  report(1, "exact-decomposition", exact_decomposition);
  report(2, "higher-order-decomposition", higher_order_decomposition);
  report(3, "projection-recovery-threshold", [&] { return projection_recovery(projectionWall); });
  report(4, "phase-transition-monotonicity", phase_monotonicity);
  report(5, "completion-end-to-end", completion_sweep);
  report(6, "separability-identity", separability);
  report(7, "contraction-rank-bound", contraction_rank_bound);
  report(8, "matrix-recovery-oracle-2x2", two_by_two);
  report(9, "degeneracy-detection", degeneracy_detection);
  report(10, "timing-sanity", [&] { return timing(projectionWall); });
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
