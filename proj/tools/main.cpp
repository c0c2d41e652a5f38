// Experiment runner: simulate | observability | control | sweep.
// Configuration comes from an optional key=value file plus flags; flags win.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "lambeam/lambeam.hpp"

namespace {

struct FlagOverrides {
  std::string config_path;
  // Optional values: only applied when the user passed the flag.
  std::int64_t seed = -1;
  std::string out, init;
  int n = -1, nt = -1, m = -1, max_iter = -1, samples = -1, jobs = -1;
  double T = -1.0, tol = -1.0;
  bool damped = false, dump_matrices = false, snapshots = false, unweighted = false;
};

lambeam::RunConfig resolve(const FlagOverrides& f, const CLI::App& sub) {
  lambeam::RunConfig cfg;
  if (!f.config_path.empty()) cfg = lambeam::RunConfig::from_file(f.config_path);
  if (sub.count("--seed")) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (sub.count("--out")) cfg.out = f.out;
  if (sub.count("--init")) cfg.init = f.init;
  if (sub.count("--n")) cfg.n = f.n;
  if (sub.count("--nt")) cfg.nt = f.nt;
  if (sub.count("--m")) cfg.m = f.m;
  if (sub.count("--max-iter")) cfg.max_iter = f.max_iter;
  if (sub.count("--samples")) cfg.samples = f.samples;
  if (sub.count("--jobs")) cfg.jobs = f.jobs;
  if (sub.count("--T")) cfg.T = f.T;
  if (sub.count("--tol")) cfg.tol = f.tol;
  if (sub.count("--damped")) cfg.damped = true;
  if (sub.count("--dump-matrices")) cfg.dump_matrices = true;
  if (sub.count("--snapshots")) cfg.snapshots = true;
  if (sub.count("--unweighted")) cfg.unweighted_traces = true;
  return cfg;
}

void add_common_flags(CLI::App* sub, FlagOverrides& f) {
  sub->add_option("--config", f.config_path, "key=value configuration file");
  sub->add_option("--seed", f.seed, "64-bit seed for all randomness");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--init", f.init, "initial data: mode:K | random | file:PATH");
  sub->add_option("--n", f.n, "number of elements");
  sub->add_option("--nt", f.nt, "number of time steps");
  sub->add_option("--T", f.T, "horizon (0 = four crossing times)");
  sub->add_option("--m", f.m, "retained modes (0 = n/3)");
  sub->add_option("--tol", f.tol, "CG relative tolerance");
  sub->add_option("--max-iter", f.max_iter, "CG iteration cap");
  sub->add_option("--samples", f.samples, "Monte Carlo samples");
  sub->add_option("--jobs", f.jobs, "sweep worker threads (0 = hardware)");
  sub->add_flag("--damped", f.damped, "use the damped slip equation (beta > 0)");
  sub->add_flag("--unweighted", f.unweighted, "unweighted trace functional variant");
  sub->add_flag("--dump-matrices", f.dump_matrices, "export M, K, B, C in Matrix Market format");
  sub->add_flag("--snapshots", f.snapshots, "write full binary state snapshots");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"laminated-beam boundary control toolkit"};
  app.require_subcommand(1);

  FlagOverrides f;
  CLI::App* sim = app.add_subcommand("simulate", "integrate the homogeneous or damped system");
  CLI::App* obs = app.add_subcommand("observability", "estimate the observability constant");
  CLI::App* ctl = app.add_subcommand("control", "compute the three HUM boundary controls");
  CLI::App* swp = app.add_subcommand("sweep", "Cartesian parameter sweep");
  for (CLI::App* sub : {sim, obs, ctl, swp}) add_common_flags(sub, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  CLI::App* sub = app.get_subcommands().front();
  lambeam::RunConfig cfg;
  try {
    cfg = resolve(f, *sub);
  } catch (const lambeam::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  }
  return lambeam::run_command(sub->get_name(), cfg);
}
