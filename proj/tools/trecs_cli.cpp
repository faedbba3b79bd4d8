// trecs command-line harness.
//
//   trecs decompose  [--input X.dtns] | [--dims --rank --trials --seed]
//   trecs recover    [--mset M.mset]  | [--dims --rank --samples ...]
//   trecs complete   [--mset M.mset]  | [--dims --rank --samples ...]
//   trecs sweep      --target projection|completion --rank 2,4,6 --samples 2n,6n
//   trecs timing     --sizes 15,30,45 --rank 3 --samples 5n
//   trecs generate   --dims --rank --seed --out model.cpm [--tensor-out X.dtns]
//                    [--design projection|completion --samples m --mset-out M.mset]
//
// Exit status: 0 done, 1 recovery failed, 2 bad configuration, 3 I/O error.

#include <trecs/trecs.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

enum Exit { kOk = 0, kFailed = 1, kConfig = 2, kIo = 3 };

struct CommonFlags {
  std::string dims, rank, samples, sizes, target, out, config;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  bool seedSet = false;
  unsigned threads = 0;
  bool noTimes = false;
};

void add_common(CLI::App *cmd, CommonFlags &f, bool withSamples) {
  cmd->add_option("--dims", f.dims, "tensor dims, e.g. 30,30,30");
  cmd->add_option("--rank", f.rank, "rank, or a comma-separated rank grid");
  if (withSamples)
    cmd->add_option("--samples", f.samples,
                    "per-group sample counts: absolute (513) or multiples of the largest "
                    "dim (12n); one group is one weight of one mode pair, so a K-way "
                    "tensor gets 2(K-1) times this many observations");
  cmd->add_option("--trials", f.trials, "trials per grid cell (default 10)");
  cmd->add_option("--seed", f.seed, "base seed")->each([&f](const std::string &) {
    f.seedSet = true;
  });
  cmd->add_option("--out", f.out, "output path (default stdout)");
  cmd->add_option("--config", f.config, "key = value file; its values override flags");
  cmd->add_option("--threads", f.threads, "worker threads");
  cmd->add_flag("--no-times", f.noTimes, "write wall times as 0 (byte-reproducible CSV)");
}

trecs::ExperimentConfig build_config(trecs::ExperimentKind kind, const CommonFlags &f) {
  trecs::ExperimentConfig cfg;
  cfg.kind = kind;
  std::map<std::string, std::string> kv;
  if (!f.dims.empty()) kv["dims"] = f.dims;
  if (!f.rank.empty()) kv["ranks"] = f.rank;
  if (!f.samples.empty()) kv["samples"] = f.samples;
  if (!f.sizes.empty()) kv["sizes"] = f.sizes;
  if (!f.target.empty()) kv["target"] = f.target;
  if (!f.out.empty()) kv["output"] = f.out;
  for (const auto &[k, v] : kv)
    trecs::apply_config_value(cfg, k, v);
  if (f.trials) cfg.trials = f.trials;
  if (f.seedSet) cfg.seed = f.seed;
  if (f.threads) cfg.threads = f.threads;
  if (f.noTimes) cfg.recordTimes = false;
  if (!f.config.empty())
    trecs::load_config(f.config, cfg);
  cfg.validate();
  return cfg;
}

template <class Write>
void write_output(const std::string &path, Write write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(path);
  if (!os)
    throw trecs::IoError("cannot open '" + path + "' for writing");
  write(os);
  if (!os)
    throw trecs::IoError("write to '" + path + "' failed");
}

int run_sweep(trecs::ExperimentKind kind, const CommonFlags &f) {
  const auto cfg = build_config(kind, f);
  const auto res = trecs::run_experiment(cfg);
  write_output(cfg.output, [&](std::ostream &os) { trecs::write_csv(os, res); });
  return kOk;
}

int run_pipeline(const std::string &msetPath, const std::string &modelOut, bool completion,
                 const CommonFlags &f) {
  const auto ms = trecs::load_measurement_set(msetPath);
  trecs::ExperimentConfig cfg;
  if (!f.config.empty())
    trecs::load_config(f.config, cfg);
  trecs::PipelineOptions opt{cfg.tolerances, f.threads ? f.threads : cfg.threads};
  try {
    const auto rep = completion ? trecs::trecs_complete(ms, cfg.solver, opt)
                                : trecs::trecs_recover(ms, cfg.solver, opt);
    write_output(f.out, [&](std::ostream &os) { trecs::write_report(os, rep); });
    if (!modelOut.empty())
      trecs::save_cp_model(modelOut, rep.model);
  } catch (const trecs::IoError &) {
    throw;
  } catch (const trecs::ArgumentError &) {
    throw;
  } catch (const trecs::Error &e) {
    std::cerr << "trecs: recovery failed: " << e.what() << '\n';
    return kFailed;
  }
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Low-rank tensor recovery from separable measurements"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string input, mset, modelOut, tensorOut, design, msetOut;

  auto *dec = app.add_subcommand("decompose", "decompose a tensor file, or run random trials");
  add_common(dec, f, false);
  dec->add_option("--input", input, "DTNS tensor to decompose; writes a CPM model");

  auto *rec = app.add_subcommand("recover", "recover from projections (file or random trials)");
  add_common(rec, f, true);
  rec->add_option("--mset", mset, "measurement set file; writes a key=value report");
  rec->add_option("--model-out", modelOut, "also save the recovered CPM model");

  auto *cmp = app.add_subcommand("complete", "complete from slice samples (file or random trials)");
  add_common(cmp, f, true);
  cmp->add_option("--mset", mset, "measurement set file; writes a key=value report");
  cmp->add_option("--model-out", modelOut, "also save the recovered CPM model");

  auto *swp = app.add_subcommand("sweep", "phase-transition sweep over ranks x samples");
  add_common(swp, f, true);
  swp->add_option("--target", f.target, "projection or completion");

  auto *tim = app.add_subcommand("timing", "recovery wall time across tensor sizes");
  add_common(tim, f, true);
  tim->add_option("--sizes", f.sizes, "cube side lengths, e.g. 15,30,45");
  tim->add_option("--target", f.target, "projection or completion");

  auto *gen = app.add_subcommand("generate", "write a random instance and measurements");
  add_common(gen, f, true);
  gen->add_option("--tensor-out", tensorOut, "save the dense tensor (DTNS)");
  gen->add_option("--design", design, "projection or completion")
      ->check(CLI::IsMember({"projection", "completion"}));
  gen->add_option("--mset-out", msetOut, "save measurements of the tensor");

  CLI11_PARSE(app, argc, argv);

  try {
    if (dec->parsed()) {
      if (input.empty())
        return run_sweep(trecs::ExperimentKind::Decompose, f);
      const auto X = trecs::load_tensor(input);
      const auto model = trecs::leurgans_decompose(X, f.seed);
      write_output(f.out, [&](std::ostream &os) { trecs::write_cp_model(os, model); });
      return kOk;
    }
    if (rec->parsed())
      return mset.empty() ? run_sweep(trecs::ExperimentKind::RecoverProjection, f)
                          : run_pipeline(mset, modelOut, false, f);
    if (cmp->parsed())
      return mset.empty() ? run_sweep(trecs::ExperimentKind::Complete, f)
                          : run_pipeline(mset, modelOut, true, f);
    if (swp->parsed())
      return run_sweep(trecs::ExperimentKind::PhaseSweep, f);
    if (tim->parsed())
      return run_sweep(trecs::ExperimentKind::Timing, f);
    if (gen->parsed()) {
      auto cfg = build_config(trecs::ExperimentKind::RecoverProjection, f);
      if (cfg.rankGrid.size() != 1)
        throw trecs::ArgumentError("generate takes a single rank");
      trecs::Rng rng(trecs::derive_seed(cfg.seed, {0}));
      const auto model = trecs::random_cp_model(cfg.dims, cfg.rankGrid[0], rng);
      const auto X = trecs::cp_evaluate(model);
      if (!cfg.output.empty())
        trecs::save_cp_model(cfg.output, model);
      if (!tensorOut.empty())
        trecs::save_tensor(tensorOut, X);
      if (!msetOut.empty()) {
        if (cfg.sampleGrid.size() != 1)
          throw trecs::ArgumentError("generate takes a single sample count");
        const auto nmax = *std::max_element(cfg.dims.begin(), cfg.dims.end());
        const auto m = cfg.sampleGrid[0].resolve(nmax);
        const auto seed = trecs::derive_seed(cfg.seed, {1});
        const auto d =
            design == "completion"
                ? trecs::make_slice_sampling_set(cfg.dims, trecs::default_slice_pairs(cfg.dims),
                                                 m, seed)
                : trecs::make_gaussian_projection_set(
                      cfg.dims, std::vector<std::size_t>(cfg.dims.size() - 1, m), seed);
        trecs::save_measurement_set(msetOut, d.measure(X));
      }
      return kOk;
    }
  } catch (const trecs::IoError &e) {
    std::cerr << "trecs: " << e.what() << '\n';
    return kIo;
  } catch (const trecs::FormatError &e) {
    std::cerr << "trecs: " << e.what() << '\n';
    return kIo;
  } catch (const trecs::ArgumentError &e) {
    std::cerr << "trecs: " << e.what() << '\n';
    return kConfig;
  } catch (const trecs::ShapeError &e) {
    std::cerr << "trecs: " << e.what() << '\n';
    return kConfig;
  } catch (const trecs::Error &e) {
    std::cerr << "trecs: " << e.what() << '\n';
    return kFailed;
  }
  return kOk;
}
