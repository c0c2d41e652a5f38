#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lambeam/config.hpp"
#include "lambeam/errors.hpp"
#include "lambeam/hum.hpp"
#include "lambeam/io.hpp"
#include "lambeam/observability.hpp"
#include "lambeam/rng.hpp"

namespace lambeam {

namespace detail {

inline nlohmann::json config_json(const RunConfig& cfg, const std::string& command) {
  const PhysicalParams p = cfg.physical();
  nlohmann::json j;
  j["command"] = command;
  j["rho1"] = p.rho1;
  j["rho2"] = p.rho2;
  j["k"] = p.k;
  j["b"] = p.b;
  j["gamma"] = p.gamma;
  j["beta"] = p.beta;
  j["L"] = p.L;
  j["n"] = cfg.n;
  j["T"] = cfg.T > 0.0 ? cfg.T : default_horizon(p);
  j["nt"] = cfg.nt;
  j["m"] = cfg.m > 0 ? cfg.m : default_filter_size(cfg.n);
  j["tol"] = cfg.tol;
  j["max_iter"] = cfg.max_iter;
  j["init"] = cfg.init;
  j["seed"] = cfg.seed;
  j["damped"] = cfg.damped;
  j["lumped_mass"] = cfg.lumped_mass;
  j["unweighted_traces"] = cfg.unweighted_traces;
  j["samples"] = cfg.samples;
  j["sigma"] = cfg.sigma;
  j["tikhonov"] = cfg.tikhonov;
  return j;
}

inline InitialData parse_init_spec(const std::string& spec, int dofs) {
  if (spec == "random") return InitialData::random();
  if (spec.rfind("mode:", 0) == 0) {
    try {
      return InitialData::mode(std::stoi(spec.substr(5)));
    } catch (const std::exception&) {
      throw ValidationError("init: bad mode index in '" + spec + "'");
    }
  }
  if (spec.rfind("file:", 0) == 0)
    return InitialData::from_state(read_state_text(spec.substr(5), dofs));
  throw ValidationError("init: expected mode:K, random, or file:PATH, got '" + spec + "'");
}

inline std::filesystem::path prepare_out(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace detail

/// simulate: homogeneous (or damped) trajectory -> trajectory.csv plus an
/// energy-drift summary; optional matrix dumps and binary snapshots.
inline void run_simulate(const RunConfig& cfg) {
  const PhysicalParams p = cfg.physical();
  if (cfg.damped && !(p.beta > 0.0))
    throw ValidationError("simulate: --damped requires beta > 0");
  if (!cfg.damped && p.beta != 0.0)
    throw ValidationError("simulate: beta > 0 needs the --damped flag");

  const Grid grid{cfg.n, p.L};
  const DiscreteSystem sys = DiscreteSystem::assemble(
      p, grid, cfg.lumped_mass ? MassModel::lumped : MassModel::consistent);
  const int m = cfg.m > 0 ? cfg.m : default_filter_size(cfg.n);

  // The conservative params (beta stripped) define the filter used only to
  // synthesize modal/random initial data.
  PhysicalParams pc = p;
  pc.beta = 0.0;
  const DiscreteSystem sys_cons = DiscreteSystem::assemble(pc, grid);
  const ModalFilter filter(sys_cons, m);
  const State U0 = make_initial_state(detail::parse_init_spec(cfg.init, sys.dofs()), sys_cons,
                                      filter, cfg.seed, 0);

  const TimeGrid tg{cfg.T > 0.0 ? cfg.T : default_horizon(p), cfg.nt};
  const Trajectory tr =
      cfg.damped ? solve_damped(sys, U0, tg) : solve_homogeneous(sys, U0, tg);

  const auto dir = detail::prepare_out(cfg);
  const std::string header = cfg.header_block("simulate");
  write_text_file(dir / "trajectory.csv", trajectory_csv(tr, header));

  double drift = 0.0;
  bool monotone = true;
  const double e0 = tr.energy(0);
  for (int j = 0; j <= tg.nt; ++j) {
    if (e0 > 0.0) drift = std::max(drift, std::abs(tr.energy(j) - e0) / e0);
    if (j > 0 && tr.energy(j) > tr.energy(j - 1) * (1.0 + 1e-12)) monotone = false;
  }

  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["config"] = detail::config_json(cfg, "simulate");
  j["energy_initial"] = tr.energy(0);
  j["energy_final"] = tr.energy(tg.nt);
  j["relative_energy_drift"] = drift;
  j["energy_monotone"] = monotone;
  j["gamma_zero_warning"] = !(p.gamma > 0.0);
  j["hs_norm_initial"] = sys_cons.fractional_norm(U0.q, cfg.sigma);
  detail::write_json(dir / "summary.json", j);

  if (cfg.dump_matrices) {
    write_text_file(dir / "M.mtx", matrix_market(sys.M(), header));
    write_text_file(dir / "K.mtx", matrix_market(sys.K(), header));
    write_text_file(dir / "B.mtx", matrix_market(sys.B(), header));
    write_text_file(dir / "C.mtx", matrix_market(sys.C(), header));
  }
  if (cfg.snapshots) write_snapshots(dir / "snapshots.bin", tr, cfg.n);
}

/// observability: Monte Carlo + variational constant estimate -> report JSON
/// and per-sample CSV.
inline void run_observability(const RunConfig& cfg) {
  const PhysicalParams p = cfg.physical();
  p.require_control_ready("observability");
  const Grid grid{cfg.n, p.L};
  const DiscreteSystem sys = DiscreteSystem::assemble(
      p, grid, cfg.lumped_mass ? MassModel::lumped : MassModel::consistent);
  const int m = cfg.m > 0 ? cfg.m : default_filter_size(cfg.n);
  const ModalFilter filter(sys, m);
  const TimeGrid tg{cfg.T > 0.0 ? cfg.T : default_horizon(p), cfg.nt};
  const TraceWeights w =
      cfg.unweighted_traces ? TraceWeights::unweighted() : TraceWeights::duality(p);

  const ObservabilityReport rep =
      estimate_observability_constant(sys, tg, filter, cfg.samples, cfg.seed, w);

  const auto dir = detail::prepare_out(cfg);
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["config"] = detail::config_json(cfg, "observability");
  j["T"] = rep.T;
  j["n"] = rep.n;
  j["m"] = rep.m;
  j["samples"] = rep.samples;
  j["c_obs_mc"] = rep.c_obs_mc;
  j["mu_min"] = rep.mu_min;
  j["mu_max"] = rep.mu_max;
  j["c_obs_variational"] = rep.c_obs_variational;
  j["mu_positive"] = rep.mu_positive;
  j["multiplier_identity_residual"] = rep.multiplier_residual;
  j["gramian_warnings"] = rep.gramian_warnings;
  if (rep.scalar_consistency_checked) j["scalar_gramian_consistent"] = rep.scalar_consistent;
  detail::write_json(dir / "observability.json", j);

  std::string csv = cfg.header_block("observability");
  csv += "sample,ratio\n";
  for (std::size_t i = 0; i < rep.sample_ratios.size(); ++i)
    csv += std::to_string(i) + "," + fmt_double(rep.sample_ratios[i]) + "\n";
  write_text_file(dir / "samples.csv", csv);

  if (!rep.mu_positive)
    throw NonConvergenceError("observability: filtered Gramian is not positive definite");
}

namespace detail {

inline nlohmann::json hum_json(const RunConfig& cfg, const PipelineResult& res) {
  const HumSolution& s = res.hum;
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["config"] = config_json(cfg, "control");
  j["iterations"] = s.cg.iterations;
  j["converged"] = s.cg.converged;
  j["residual_history"] = s.cg.residual_history;
  j["mu_min"] = s.mu_min;
  j["mu_max"] = s.mu_max;
  j["energy_initial"] = s.initial_energy;
  j["energy_final_filtered"] = s.final_energy_filtered;
  j["energy_final_unfiltered"] = s.final_energy_unfiltered;
  j["final_ratio_filtered"] =
      s.initial_energy > 0.0 ? s.final_energy_filtered / s.initial_energy : 0.0;
  j["final_ratio_unfiltered"] =
      s.initial_energy > 0.0 ? s.final_energy_unfiltered / s.initial_energy : 0.0;
  j["control_norm_l2"] = s.control_norm_l2;
  j["control_norm_weighted"] = s.control_norm_weighted;
  j["control_bound"] = s.control_bound;
  j["gramian_warnings"] = res.gramian_warnings;
  j["T"] = res.T;
  j["n"] = res.n;
  j["m"] = res.m;
  j["nt"] = res.nt;
  return j;
}

inline PipelineResult run_pipeline_for(const RunConfig& cfg, std::uint64_t stream_base,
                                       const PhysicalParams& p) {
  PipelineOptions opt;
  opt.n = cfg.n;
  opt.m = cfg.m;
  opt.T = cfg.T;
  opt.nt = cfg.nt;
  opt.tol = cfg.tol;
  opt.max_iter = cfg.max_iter;
  opt.unweighted_traces = cfg.unweighted_traces;
  opt.mass = cfg.lumped_mass ? MassModel::lumped : MassModel::consistent;
  opt.tikhonov = cfg.tikhonov;
  opt.seed = cfg.seed;
  opt.stream_base = stream_base;
  return null_control_pipeline(p, opt, parse_init_spec(cfg.init, 3 * cfg.n));
}

}  // namespace detail

/// control: the full HUM pipeline -> controls.csv, diagnostics.json,
/// controlled_trajectory.csv. Non-convergence still writes diagnostics and
/// reports exit code 3 through NonConvergenceError.
inline void run_control(const RunConfig& cfg) {
  const PhysicalParams p = cfg.physical();
  p.require_control_ready("control");
  const PipelineResult res = detail::run_pipeline_for(cfg, 0, p);

  const auto dir = detail::prepare_out(cfg);
  const std::string header = cfg.header_block("control");
  const TimeGrid tg{res.T, res.nt};
  write_text_file(dir / "controls.csv", controls_csv(tg, res.hum.controls, header));
  detail::write_json(dir / "diagnostics.json", detail::hum_json(cfg, res));
  write_text_file(dir / "controlled_trajectory.csv", trajectory_csv(res.controlled, header));

  if (!res.hum.cg.converged)
    throw NonConvergenceError("control: CG did not reach tol within max_iter (diagnostics written)");
}

/// sweep: Cartesian product over the declared ranges; cells run in a worker
/// pool, per-cell failures are recorded in the status column and the sweep
/// continues. Rows are emitted in cell order regardless of scheduling.
inline void run_sweep(const RunConfig& cfg) {
  const PhysicalParams base = cfg.physical();
  const std::vector<int> ns = cfg.sweep_n.empty() ? std::vector<int>{cfg.n} : cfg.sweep_n;
  const std::vector<int> ms = cfg.sweep_m.empty() ? std::vector<int>{cfg.m} : cfg.sweep_m;
  const std::vector<double> Ts = cfg.sweep_T.empty() ? std::vector<double>{cfg.T} : cfg.sweep_T;
  const std::vector<double> gs =
      cfg.sweep_gamma.empty() ? std::vector<double>{base.gamma} : cfg.sweep_gamma;
  const std::vector<double> bs =
      cfg.sweep_beta.empty() ? std::vector<double>{base.beta} : cfg.sweep_beta;

  struct Cell {
    int n, m;
    double T, gamma, beta;
  };
  std::vector<Cell> cells;
  for (int n : ns)
    for (int m : ms)
      for (double T : Ts)
        for (double g : gs)
          for (double b : bs) cells.push_back({n, m, T, g, b});

  std::vector<std::string> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      std::ostringstream row;
      row << i << ',' << c.n << ',' << c.m << ',' << fmt_double(c.T) << ','
          << fmt_double(c.gamma) << ',' << fmt_double(c.beta) << ',';
      try {
        RunConfig cell_cfg = cfg;
        cell_cfg.n = c.n;
        cell_cfg.m = c.m;
        cell_cfg.T = c.T;
        PhysicalParams p = base;
        p.gamma = c.gamma;
        p.beta = c.beta;
        p.require_control_ready("sweep cell");
        const PipelineResult res = detail::run_pipeline_for(cell_cfg, i, p);
        const HumSolution& s = res.hum;
        const double fr = s.initial_energy > 0.0 ? s.final_energy_filtered / s.initial_energy : 0.0;
        const double fu =
            s.initial_energy > 0.0 ? s.final_energy_unfiltered / s.initial_energy : 0.0;
        row << fmt_double(s.mu_min) << ',' << fmt_double(s.mu_min > 0.0 ? 1.0 / s.mu_min : 0.0)
            << ',' << fmt_double(fr) << ',' << fmt_double(fu) << ','
            << fmt_double(s.control_norm_l2) << ',' << s.cg.iterations << ','
            << (s.cg.converged ? "ok" : "max_iter");
      } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& ch : msg)
          if (ch == ',' || ch == '\n') ch = ';';
        row << ",,,,,," << "error: " << msg;
      }
      rows[i] = row.str();
    }
  };

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers = std::max(
      1, std::min<int>(cfg.jobs > 0 ? cfg.jobs : std::max(1, hw),
                       static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string csv = cfg.header_block("sweep");
  csv +=
      "cell,n,m,T,gamma,beta,mu_min,c_obs,final_ratio_filtered,final_ratio_unfiltered,"
      "control_norm,cg_iters,status\n";
  for (const auto& r : rows) csv += r + "\n";
  write_text_file(detail::prepare_out(cfg) / "sweep.csv", csv);
}

/// Dispatch with the documented exit-code mapping: 0 success, 2 validation
/// error, 3 solver non-convergence.
inline int run_command(const std::string& command, const RunConfig& cfg) {
  try {
    if (command == "simulate")
      run_simulate(cfg);
    else if (command == "observability")
      run_observability(cfg);
    else if (command == "control")
      run_control(cfg);
    else if (command == "sweep")
      run_sweep(cfg);
    else
      throw ValidationError("unknown command: " + command);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lambeam
