#pragma once

// Tensor recovery via contractions. Every mode pair k carries two groups of
// separable measurements y_g = T_g(contract(X, (k, k+1), W_g)). The pipeline
//
//   1. recovers each contraction by nuclear-norm minimization,
//   2. extracts factors of modes k and k+1 from each recovered pair,
//   3. chains the per-pair factors into one factor per mode,
//   4. fits the weights against every observation at once.

#include "cp_model.hpp"
#include "decomposition.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "matrix_recovery.hpp"
#include "measurement.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace trecs {

struct PipelineOptions {
  DecompositionTolerances tolerances{};
  /// Worker threads for the contraction solves; 1 solves in order and stops
  /// at the first unconverged subproblem.
  unsigned threads = 1;
};

struct ContractionDiagnostics {
  std::size_t mode = 0;
  int group = 0; // 1 or 2
  RecoveredMatrix solve;
};

struct RecoveryReport {
  CPModel model;
  std::vector<ContractionDiagnostics> perContraction;
  /// Pairing eigenvalue gap per mode pair, relative to the largest eigenvalue.
  std::vector<double> minEigGap;
  double lambdaResidual = 0;
  /// Relative Frobenius error against a known truth; experiments only.
  std::optional<double> reconstructionError;
  double solveSeconds = 0;
  double factorSeconds = 0;
  double lambdaSeconds = 0;
  double totalSeconds = 0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline RecoveredMatrix solve_group(const MeasurementGroup &g, const SolverConfig &cfg) {
  return recover_affine(g.op.inner(), g.y, cfg);
}

inline void check_mode_coverage(const MeasurementSet &ms) {
  validate_measurement_set(ms);
  const std::size_t K = ms.sourceDims.size();
  if (K < 3)
    throw ShapeError("recovery needs a tensor of order >= 3");
  if (ms.modes.size() != K - 1)
    throw ArgumentError("measurement set must cover all " + std::to_string(K - 1) +
                        " mode pairs, got " + std::to_string(ms.modes.size()));
  for (std::size_t k = 0; k < ms.modes.size(); ++k)
    if (ms.modes[k].mode != k)
      throw ArgumentError("mode pairs must be listed in order 0.." + std::to_string(K - 2));
}

} // namespace detail

/// Recover a low-rank tensor and its CP decomposition from a measurement set.
inline RecoveryReport trecs_recover(const MeasurementSet &ms, const SolverConfig &cfg = {},
                                    const PipelineOptions &opt = {}) {
  cfg.validate();
  detail::check_mode_coverage(ms);
  const auto t_start = detail::Clock::now();
  RecoveryReport rep;

  // (1) contraction solves, results in (mode, group) order
  std::vector<const MeasurementGroup *> jobs;
  for (const auto &m : ms.modes)
    for (const auto &g : m.groups)
      jobs.push_back(&g);
  std::vector<RecoveredMatrix> solved(jobs.size());
  if (opt.threads > 1) {
    std::vector<std::future<RecoveredMatrix>> fut;
    for (std::size_t i = 0; i < jobs.size();) {
      fut.clear();
      const std::size_t end = std::min(jobs.size(), i + opt.threads);
      for (std::size_t j = i; j < end; ++j)
        fut.push_back(std::async(std::launch::async, detail::solve_group, std::cref(*jobs[j]),
                                 std::cref(cfg)));
      for (std::size_t j = i; j < end; ++j)
        solved[j] = fut[j - i].get();
      i = end;
    }
  } else {
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      solved[j] = detail::solve_group(*jobs[j], cfg);
      if (!solved[j].converged)
        break;
    }
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    rep.perContraction.push_back({j / 2, static_cast<int>(j % 2) + 1, solved[j]});
    if (!solved[j].converged)
      throw RecoveryError("contraction " + std::to_string(j % 2 + 1) + " of mode pair " +
                          std::to_string(j / 2) + " did not converge (residual " +
                          std::to_string(solved[j].residual) + ", " +
                          std::to_string(solved[j].iterations) + " iterations)");
  }
  rep.solveSeconds = detail::seconds_since(t_start);

  // (2) + (3) factors per mode pair, chained across pairs
  const auto t_factor = detail::Clock::now();
  std::vector<ModeFactors> perPair;
  for (std::size_t k = 0; k < ms.modes.size(); ++k) {
    ContractionPair pair(solved[2 * k].Z, solved[2 * k + 1].Z, k, opt.tolerances.rankTol);
    perPair.push_back(factors_from_pair(pair, opt.tolerances));
    rep.minEigGap.push_back(perPair.back().minRelativeGap);
  }
  const Eigen::Index r = perPair.front().left.cols();
  if (r == 0) {
    std::vector<Eigen::MatrixXd> empty;
    for (auto n : ms.sourceDims)
      empty.emplace_back(static_cast<Eigen::Index>(n), 0);
    rep.model = CPModel(std::move(empty), Eigen::VectorXd(0));
    rep.factorSeconds = detail::seconds_since(t_factor);
    rep.totalSeconds = detail::seconds_since(t_start);
    return rep;
  }
  auto factors = chain_factors(perPair, opt.tolerances.matchTol);
  rep.factorSeconds = detail::seconds_since(t_factor);

  // (4) weights against all observations
  const auto t_lambda = detail::Clock::now();
  std::vector<DenseTensor> components;
  for (Eigen::Index l = 0; l < r; ++l) {
    std::vector<Eigen::VectorXd> cols;
    for (const auto &f : factors)
      cols.emplace_back(f.col(l));
    components.push_back(rank_one(cols));
  }
  const auto rows = static_cast<Eigen::Index>(ms.total_samples());
  if (rows < r)
    throw RecoveryError("fewer observations than components");
  Eigen::MatrixXd design(rows, r);
  Eigen::VectorXd rhs(rows);
  Eigen::Index row = 0;
  for (const auto &m : ms.modes)
    for (const auto &g : m.groups) {
      const auto len = g.y.size();
      for (Eigen::Index l = 0; l < r; ++l)
        design.col(l).segment(row, len) =
            apply_tensor(g.op, components[static_cast<std::size_t>(l)]);
      rhs.segment(row, len) = g.y;
      row += len;
    }
  const auto w = lstsq(design, rhs);
  if (w.rankDeficient)
    throw RecoveryError("weight system is rank deficient (rank " + std::to_string(w.rank) +
                        " < " + std::to_string(r) + ")");
  rep.lambdaResidual = w.relativeResidual;
  rep.model = CPModel(std::move(factors), w.x);
  rep.lambdaSeconds = detail::seconds_since(t_lambda);
  rep.totalSeconds = detail::seconds_since(t_start);
  return rep;
}

/// Completion from slice-restricted entry samples; same pipeline, with every
/// group required to observe entries of one designated slice.
inline RecoveryReport trecs_complete(const MeasurementSet &ms, const SolverConfig &cfg = {},
                                     const PipelineOptions &opt = {}) {
  for (const auto &m : ms.modes)
    for (const auto &g : m.groups) {
      if (!std::holds_alternative<SliceIndex>(g.op.weight()) ||
          !std::holds_alternative<EntrySampling>(g.op.inner()))
        throw ArgumentError("completion needs entry samples of designated slices");
    }
  for (const auto &m : ms.modes)
    if (std::get<SliceIndex>(m.groups[0].op.weight()) ==
        std::get<SliceIndex>(m.groups[1].op.weight()))
      throw ArgumentError("the two slices of mode pair " + std::to_string(m.mode) +
                          " must be distinct");
  return trecs_recover(ms, cfg, opt);
}

/// Relative residual of the model's predicted measurements against `ms`.
inline double measurement_residual(const MeasurementSet &ms, const CPModel &model) {
  const DenseTensor X = cp_evaluate(model);
  double num = 0, den = 0;
  for (const auto &m : ms.modes)
    for (const auto &g : m.groups) {
      num += (apply_tensor(g.op, X) - g.y).squaredNorm();
      den += g.y.squaredNorm();
    }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Key-value report, one `key=value` per line:
///
///   format=trecs-report-1
///   order, rank, dims (comma separated), weights (space separated)
///   lambda_residual, reconstruction_error (only when known)
///   time.solve_s, time.factor_s, time.lambda_s, time.total_s
///   mode.<k>.min_eig_gap
///   contraction.<k>.<g>.{residual,iterations,converged,rank,nuclear_norm}
inline void write_report(std::ostream &os, const RecoveryReport &rep) {
  os << std::setprecision(17);
  os << "format=trecs-report-1\n";
  os << "order=" << rep.model.order() << '\n';
  os << "rank=" << rep.model.rank() << '\n';
  os << "dims=";
  const auto dims = rep.model.dims();
  for (std::size_t i = 0; i < dims.size(); ++i)
    os << (i ? "," : "") << dims[i];
  os << "\nweights=";
  for (Eigen::Index l = 0; l < rep.model.weights().size(); ++l)
    os << (l ? " " : "") << rep.model.weights()(l);
  os << "\nlambda_residual=" << rep.lambdaResidual << '\n';
  if (rep.reconstructionError)
    os << "reconstruction_error=" << *rep.reconstructionError << '\n';
  os << "time.solve_s=" << rep.solveSeconds << '\n'
     << "time.factor_s=" << rep.factorSeconds << '\n'
     << "time.lambda_s=" << rep.lambdaSeconds << '\n'
     << "time.total_s=" << rep.totalSeconds << '\n';
  for (std::size_t k = 0; k < rep.minEigGap.size(); ++k)
    os << "mode." << k << ".min_eig_gap=" << rep.minEigGap[k] << '\n';
  for (const auto &c : rep.perContraction) {
    const std::string key = "contraction." + std::to_string(c.mode) + "." + std::to_string(c.group);
    os << key << ".residual=" << c.solve.residual << '\n'
       << key << ".iterations=" << c.solve.iterations << '\n'
       << key << ".converged=" << (c.solve.converged ? 1 : 0) << '\n'
       << key << ".rank=" << c.solve.numericalRank << '\n'
       << key << ".nuclear_norm=" << c.solve.nuclearNorm << '\n';
  }
}

} // namespace trecs
