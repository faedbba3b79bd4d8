#pragma once

// Seeded experiment harness: random instances, phase-transition sweeps,
// timing runs, CSV output.
//
// A grid cell is (r, m) (plus n for timing runs) and runs `trials` trials.
// Trial t of a cell uses seed derive_seed(seed, {r, m, t}) (timing prepends
// n), with sub-seeds {0} for the model, {1} for the measurement design and
// {2} for the decomposition weights. Any cell can be replayed on its own.
//
// m is the per-group sample count: Gaussian matrices per weight group for
// projection recovery, sampled entries per designated slice for completion.
// A K-way instance therefore sees 2(K-1)m observations in total.

#include "cp_model.hpp"
#include "decomposition.hpp"
#include "error.hpp"
#include "io.hpp"
#include "matrix_recovery.hpp"
#include "measurement.hpp"
#include "pipeline.hpp"
#include "random.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace trecs {

enum class ExperimentKind { Decompose, RecoverProjection, Complete, PhaseSweep, Timing };
enum class SweepTarget { Projection, Completion };

inline const char *to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::Decompose: return "decompose";
  case ExperimentKind::RecoverProjection: return "recover-projection";
  case ExperimentKind::Complete: return "complete";
  case ExperimentKind::PhaseSweep: return "phase-sweep";
  case ExperimentKind::Timing: return "timing";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string &s) {
  for (auto k : {ExperimentKind::Decompose, ExperimentKind::RecoverProjection,
                 ExperimentKind::Complete, ExperimentKind::PhaseSweep, ExperimentKind::Timing})
    if (s == to_string(k))
      return k;
  if (s == "recover")
    return ExperimentKind::RecoverProjection;
  if (s == "sweep")
    return ExperimentKind::PhaseSweep;
  throw ArgumentError("unknown experiment kind '" + s + "'");
}

inline const char *to_string(SweepTarget t) {
  return t == SweepTarget::Projection ? "projection" : "completion";
}

inline SweepTarget parse_target(const std::string &s) {
  if (s == "projection" || s == "recover" || s == "recover-projection")
    return SweepTarget::Projection;
  if (s == "completion" || s == "complete")
    return SweepTarget::Completion;
  throw ArgumentError("unknown sweep target '" + s + "'");
}

/// A sample count, either absolute ("513") or a multiple of the largest
/// dimension ("12n", "0.5n").
struct SampleSpec {
  double value = 0;
  bool perN = false;

  std::size_t resolve(std::size_t n) const {
    if (!perN)
      return static_cast<std::size_t>(value);
    return static_cast<std::size_t>(std::ceil(value * static_cast<double>(n) - 1e-9));
  }

  static SampleSpec parse(std::string s) {
    SampleSpec out;
    if (!s.empty() && (s.back() == 'n' || s.back() == 'N')) {
      out.perN = true;
      s.pop_back();
    }
    std::size_t used = 0;
    try {
      out.value = std::stod(s, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (s.empty() || used != s.size() || !(out.value > 0) || !std::isfinite(out.value) ||
        (!out.perN && out.value != std::floor(out.value)))
      throw ArgumentError("bad sample count '" + s + (out.perN ? "n" : "") +
                          "': expected a positive integer or a multiple like 12n");
    return out;
  }

  std::string str() const {
    std::ostringstream os;
    os << value;
    if (perN)
      os << 'n';
    return os.str();
  }
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::PhaseSweep;
  /// Measurement model for phase-sweep and timing runs.
  SweepTarget sweepTarget = SweepTarget::Projection;
  Dims dims{30, 30, 30};
  std::vector<std::size_t> rankGrid{3};
  std::vector<SampleSpec> sampleGrid{{12, true}};
  /// Timing runs: cube side lengths, tensor order taken from `dims`.
  std::vector<std::size_t> sizeGrid{15, 30, 45};
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  /// Success when ||X_hat - X||_F^2 / ||X||_F^2 is below this.
  double successThreshold = 1e-5;
  std::string output;
  SolverConfig solver{};
  DecompositionTolerances tolerances{};
  /// Trials run concurrently on this many workers.
  unsigned threads = 1;
  /// Off: wall times are written as 0 so the CSV is byte-reproducible.
  bool recordTimes = true;

  bool uses_samples() const { return kind != ExperimentKind::Decompose; }

  void validate() const {
    if (trials < 1)
      throw ArgumentError("trials must be at least 1");
    if (rankGrid.empty())
      throw ArgumentError("rank grid is empty");
    if (uses_samples() && sampleGrid.empty())
      throw ArgumentError("sample grid is empty");
    if (kind == ExperimentKind::Timing && sizeGrid.empty())
      throw ArgumentError("size grid is empty");
    if (dims.size() < 3)
      throw ArgumentError("experiments need a tensor of order >= 3");
    for (auto n : dims)
      if (n == 0)
        throw ArgumentError("dims must be positive");
    for (auto n : sizeGrid)
      if (n == 0)
        throw ArgumentError("sizes must be positive");
    if (!(successThreshold > 0))
      throw ArgumentError("success threshold must be positive");
    if (threads < 1)
      throw ArgumentError("threads must be at least 1");
    solver.validate();
  }
};

struct SweepRow {
  std::size_t n = 0; // timing runs only
  std::size_t r = 0;
  std::size_t m = 0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  double meanError = 0;
  double meanWallTime = 0;

  friend bool operator==(const SweepRow &, const SweepRow &) = default;
};

struct SweepResult {
  /// Rows carry a leading n column (timing runs).
  bool hasSize = false;
  std::vector<SweepRow> rows;

  friend bool operator==(const SweepResult &, const SweepResult &) = default;
};

struct TrialOutcome {
  bool success = false;
  /// Relative MSE; 1 when the trial threw.
  double error = 1.0;
  double wallTime = 0;
  std::string failure;
};

inline double relative_mse(const DenseTensor &estimate, const DenseTensor &truth) {
  const double e = relative_error(estimate, truth);
  return e * e;
}

/// One self-contained trial; never throws for pipeline failures.
inline TrialOutcome run_trial(ExperimentKind kind, SweepTarget target, const Dims &dims,
                              std::size_t r, std::size_t m, std::uint64_t trialSeed,
                              const ExperimentConfig &cfg) {
  TrialOutcome out;
  Rng modelRng(derive_seed(trialSeed, {0}));
  const CPModel truth = random_cp_model(dims, r, modelRng);
  const DenseTensor X = cp_evaluate(truth);
  const auto designSeed = derive_seed(trialSeed, {1});
  try {
    CPModel est;
    if (kind == ExperimentKind::Decompose) {
      const auto t0 = std::chrono::steady_clock::now();
      est = leurgans_decompose(X, derive_seed(trialSeed, {2}), cfg.tolerances);
      out.wallTime = detail::seconds_since(t0);
    } else {
      const bool completion = kind == ExperimentKind::Complete ||
                              (kind != ExperimentKind::RecoverProjection &&
                               target == SweepTarget::Completion);
      const auto design =
          completion
              ? make_slice_sampling_set(dims, default_slice_pairs(dims), m, designSeed)
              : make_gaussian_projection_set(dims, std::vector<std::size_t>(dims.size() - 1, m),
                                             designSeed);
      const auto ms = design.measure(X);
      PipelineOptions opt{cfg.tolerances, 1};
      const auto t0 = std::chrono::steady_clock::now();
      auto rep = completion ? trecs_complete(ms, cfg.solver, opt)
                            : trecs_recover(ms, cfg.solver, opt);
      out.wallTime = detail::seconds_since(t0);
      est = std::move(rep.model);
    }
    out.error = relative_mse(cp_evaluate(est), X);
    out.success = out.error < cfg.successThreshold;
  } catch (const Error &e) {
    out.error = 1.0;
    out.success = false;
    out.failure = e.what();
  }
  if (!cfg.recordTimes)
    out.wallTime = 0;
  return out;
}

namespace detail {

/// Runs fn(i) for i in [0, count) on `threads` workers; results by index.
template <class Fn>
auto parallel_map(std::size_t count, unsigned threads, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> results(count);
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(threads, count);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++)
        results[i] = fn(i);
    });
  for (auto &t : pool)
    t.join();
  return results;
}

struct Cell {
  std::size_t n, r, m;
  Dims dims;
};

} // namespace detail

inline SweepResult run_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  const bool timing = cfg.kind == ExperimentKind::Timing;
  const bool completion =
      cfg.kind == ExperimentKind::Complete ||
      ((cfg.kind == ExperimentKind::PhaseSweep || timing) &&
       cfg.sweepTarget == SweepTarget::Completion);

  std::vector<detail::Cell> cells;
  auto add_cells = [&](std::size_t n, const Dims &dims) {
    const std::size_t nmax = *std::max_element(dims.begin(), dims.end());
    for (auto r : cfg.rankGrid) {
      if (!cfg.uses_samples()) {
        cells.push_back({n, r, 0, dims});
        continue;
      }
      for (const auto &s : cfg.sampleGrid) {
        const auto m = s.resolve(nmax);
        if (m == 0)
          throw ArgumentError("sample count " + s.str() + " resolves to zero");
        if (completion)
          for (std::size_t k = 0; k + 1 < dims.size(); ++k)
            if (m > dims[k] * dims[k + 1])
              throw ArgumentError("sample count " + std::to_string(m) +
                                  " exceeds the slice size " +
                                  std::to_string(dims[k] * dims[k + 1]));
        cells.push_back({n, r, m, dims});
      }
    }
  };
  if (timing) {
    for (auto n : cfg.sizeGrid)
      add_cells(n, Dims(cfg.dims.size(), n));
  } else {
    add_cells(0, cfg.dims);
  }

  const std::size_t T = cfg.trials;
  const auto outcomes = detail::parallel_map(cells.size() * T, cfg.threads, [&](std::size_t i) {
    const auto &c = cells[i / T];
    const std::uint64_t t = i % T;
    const auto ts = timing ? derive_seed(cfg.seed, {c.n, c.r, c.m, t})
                           : derive_seed(cfg.seed, {c.r, c.m, t});
    return run_trial(cfg.kind, cfg.sweepTarget, c.dims, c.r, c.m, ts, cfg);
  });

  SweepResult res;
  res.hasSize = timing;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    SweepRow row{cells[ci].n, cells[ci].r, cells[ci].m, 0, T, 0, 0};
    for (std::size_t t = 0; t < T; ++t) {
      const auto &o = outcomes[ci * T + t];
      row.successes += o.success ? 1 : 0;
      row.meanError += o.error;
      row.meanWallTime += o.wallTime;
    }
    row.meanError /= static_cast<double>(T);
    row.meanWallTime /= static_cast<double>(T);
    res.rows.push_back(row);
  }
  return res;
}

// ---------------------------------------------------------------------------
// CSV: header `r,m,successes,trials,mean_error,mean_wall_time_s`, prefixed by
// an `n` column for timing results. Reals use 17 significant digits.

inline void write_csv(std::ostream &os, const SweepResult &res) {
  io_detail::set_precision(os);
  if (res.hasSize)
    os << "n,";
  os << "r,m,successes,trials,mean_error,mean_wall_time_s\n";
  for (const auto &row : res.rows) {
    if (res.hasSize)
      os << row.n << ',';
    os << row.r << ',' << row.m << ',' << row.successes << ',' << row.trials << ','
       << row.meanError << ',' << row.meanWallTime << '\n';
  }
}

inline void emit_csv(const SweepResult &res, const std::string &path) {
  save_file(path, res, [](std::ostream &os, const SweepResult &r) { write_csv(os, r); });
}

namespace detail {

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    out.push_back(cur);
  if (!s.empty() && s.back() == sep)
    out.emplace_back();
  return out;
}

inline std::size_t parse_size(const std::string &s, const char *what) {
  std::size_t v = 0;
  const auto *end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end)
    throw FormatError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

inline double parse_real(const std::string &s, const char *what) {
  std::istringstream is(s);
  double v = 0;
  if (!(is >> v) || !(is >> std::ws).eof())
    throw FormatError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

} // namespace detail

inline SweepResult read_csv(std::istream &is) {
  std::string line;
  if (!std::getline(is, line))
    throw FormatError("empty CSV");
  SweepResult res;
  if (line == "n,r,m,successes,trials,mean_error,mean_wall_time_s")
    res.hasSize = true;
  else if (line != "r,m,successes,trials,mean_error,mean_wall_time_s")
    throw FormatError("unexpected CSV header '" + line + "'");
  const std::size_t width = res.hasSize ? 7 : 6;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    const auto f = detail::split(line, ',');
    if (f.size() != width)
      throw FormatError("CSV row has " + std::to_string(f.size()) + " fields: '" + line + "'");
    std::size_t i = 0;
    SweepRow row;
    if (res.hasSize)
      row.n = detail::parse_size(f[i++], "n");
    row.r = detail::parse_size(f[i++], "r");
    row.m = detail::parse_size(f[i++], "m");
    row.successes = detail::parse_size(f[i++], "successes");
    row.trials = detail::parse_size(f[i++], "trials");
    row.meanError = detail::parse_real(f[i++], "mean_error");
    row.meanWallTime = detail::parse_real(f[i++], "mean_wall_time_s");
    if (row.successes > row.trials)
      throw FormatError("successes exceed trials in '" + line + "'");
    res.rows.push_back(row);
  }
  return res;
}

inline SweepResult read_csv(const std::string &path) {
  return load_file(path, [](std::istream &is) { return read_csv(is); });
}

// ---------------------------------------------------------------------------
// Config files: `key = value` lines, `#` starts a comment. Keys:
//   kind, target, dims, ranks, samples, sizes, trials, seed, threshold,
//   output, threads, record_times, max_iters, rel_tol, feas_tol, rank_tol,
//   tau_initial, tau_decay, tau_floor
// Lists are comma separated.

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::size_t> parse_size_list(const std::string &v, const char *what) {
  std::vector<std::size_t> out;
  for (const auto &f : split(v, ','))
    out.push_back(parse_size(trim(f), what));
  return out;
}

} // namespace detail

inline void apply_config_value(ExperimentConfig &cfg, const std::string &key,
                               const std::string &value) {
  const auto v = detail::trim(value);
  try {
    if (key == "kind") {
      cfg.kind = parse_kind(v);
    } else if (key == "target") {
      cfg.sweepTarget = parse_target(v);
    } else if (key == "dims") {
      cfg.dims = detail::parse_size_list(v, "dimension");
    } else if (key == "ranks" || key == "rank") {
      cfg.rankGrid = detail::parse_size_list(v, "rank");
    } else if (key == "samples") {
      cfg.sampleGrid.clear();
      for (const auto &f : detail::split(v, ','))
        cfg.sampleGrid.push_back(SampleSpec::parse(detail::trim(f)));
    } else if (key == "sizes") {
      cfg.sizeGrid = detail::parse_size_list(v, "size");
    } else if (key == "trials") {
      cfg.trials = detail::parse_size(v, "trials");
    } else if (key == "seed") {
      cfg.seed = detail::parse_size(v, "seed");
    } else if (key == "threshold") {
      cfg.successThreshold = detail::parse_real(v, "threshold");
    } else if (key == "output" || key == "out") {
      cfg.output = v;
    } else if (key == "threads") {
      cfg.threads = static_cast<unsigned>(detail::parse_size(v, "threads"));
    } else if (key == "record_times") {
      if (v != "0" && v != "1" && v != "true" && v != "false")
        throw FormatError("record_times must be true or false");
      cfg.recordTimes = v == "1" || v == "true";
    } else if (key == "max_iters") {
      cfg.solver.maxIters = static_cast<int>(detail::parse_size(v, "max_iters"));
    } else if (key == "rel_tol") {
      cfg.solver.relTol = detail::parse_real(v, "rel_tol");
    } else if (key == "feas_tol") {
      cfg.solver.feasTol = detail::parse_real(v, "feas_tol");
    } else if (key == "rank_tol") {
      cfg.solver.rankTol = detail::parse_real(v, "rank_tol");
    } else if (key == "tau_initial") {
      cfg.solver.penaltyPath.initial = detail::parse_real(v, "tau_initial");
    } else if (key == "tau_decay") {
      cfg.solver.penaltyPath.decay = detail::parse_real(v, "tau_decay");
    } else if (key == "tau_floor") {
      cfg.solver.penaltyPath.floor = detail::parse_real(v, "tau_floor");
    } else {
      throw ArgumentError("unknown config key '" + key + "'");
    }
  } catch (const FormatError &e) {
    throw ArgumentError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void read_config(std::istream &is, ExperimentConfig &cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_config_value(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline void load_config(const std::string &path, ExperimentConfig &cfg) {
  load_file(path, [&](std::istream &is) {
    read_config(is, cfg);
    return 0;
  });
}

} // namespace trecs
