#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lambeam/errors.hpp"
#include "lambeam/params.hpp"

namespace lambeam {

/// Experiment configuration: flat key=value text file, overridable by CLI
/// flags (flags win). Unknown keys are rejected so typos surface as
/// validation errors, not silent defaults.
struct RunConfig {
  enum class ParamForm { timoshenko, hansen_spies };

  ParamForm form = ParamForm::timoshenko;
  PhysicalParams tparams{};     // used when form == timoshenko
  HansenSpiesParams hsparams{};  // used when form == hansen_spies

  int n = 32;
  double T = 0.0;  // 0 -> four crossing times
  int nt = 2000;
  int m = 0;  // 0 -> n/3
  double tol = 1e-10;
  int max_iter = 200;
  std::string init = "mode:1";  // mode:K | random | file:PATH
  std::uint64_t seed = 1;
  std::string out = "out";
  bool damped = false;
  bool lumped_mass = false;
  bool unweighted_traces = false;
  bool dump_matrices = false;
  bool snapshots = false;
  int samples = 64;
  int jobs = 0;  // 0 -> hardware concurrency
  double sigma = 0.75;
  double tikhonov = 0.0;
  std::vector<double> sweep_T, sweep_gamma, sweep_beta;
  std::vector<int> sweep_n, sweep_m;

  PhysicalParams physical() const {
    PhysicalParams p = (form == ParamForm::hansen_spies) ? from_hansen_spies(hsparams) : tparams;
    p.validate();
    return p;
  }

  static RunConfig from_file(const std::string& path) {
    RunConfig cfg;
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ValidationError("config: line " + std::to_string(lineno) +
                              " is not key=value: " + line);
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  /// Apply one key=value; shared by the file parser and the flag overrides.
  void set(const std::string& key, const std::string& value) {
    if (key == "form") {
      if (value == "timoshenko")
        form = ParamForm::timoshenko;
      else if (value == "hansen_spies")
        form = ParamForm::hansen_spies;
      else
        throw ValidationError("config: form must be timoshenko or hansen_spies");
    } else if (key == "rho1") tparams.rho1 = num(key, value);
    else if (key == "rho2") tparams.rho2 = num(key, value);
    else if (key == "k") tparams.k = num(key, value);
    else if (key == "b") tparams.b = num(key, value);
    else if (key == "gamma") tparams.gamma = num(key, value);
    else if (key == "beta") tparams.beta = num(key, value);
    else if (key == "L") { tparams.L = num(key, value); hsparams.L = tparams.L; }
    else if (key == "rho") hsparams.rho = num(key, value);
    else if (key == "I_rho") hsparams.I_rho = num(key, value);
    else if (key == "G") hsparams.G = num(key, value);
    else if (key == "D") hsparams.D = num(key, value);
    else if (key == "delta0") hsparams.delta0 = num(key, value);
    else if (key == "gamma0") hsparams.gamma0 = num(key, value);
    else if (key == "n") n = intval(key, value);
    else if (key == "T") T = num(key, value);
    else if (key == "nt") nt = intval(key, value);
    else if (key == "m") m = intval(key, value);
    else if (key == "tol") tol = num(key, value);
    else if (key == "max_iter") max_iter = intval(key, value);
    else if (key == "init") init = value;
    else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "out") out = value;
    else if (key == "damped") damped = boolean(key, value);
    else if (key == "lumped_mass") lumped_mass = boolean(key, value);
    else if (key == "unweighted_traces") unweighted_traces = boolean(key, value);
    else if (key == "dump_matrices") dump_matrices = boolean(key, value);
    else if (key == "snapshots") snapshots = boolean(key, value);
    else if (key == "samples") samples = intval(key, value);
    else if (key == "jobs") jobs = intval(key, value);
    else if (key == "sigma") sigma = num(key, value);
    else if (key == "tikhonov") tikhonov = num(key, value);
    else if (key == "sweep_n") sweep_n = int_list(key, value);
    else if (key == "sweep_m") sweep_m = int_list(key, value);
    else if (key == "sweep_T") sweep_T = num_list(key, value);
    else if (key == "sweep_gamma") sweep_gamma = num_list(key, value);
    else if (key == "sweep_beta") sweep_beta = num_list(key, value);
    else throw ValidationError("config: unknown key '" + key + "'");
  }

  /// Resolved configuration as '# key=value' comment lines. Deliberately
  /// omits out/jobs so reruns into different directories stay byte-identical.
  std::string header_block(const std::string& command) const {
    std::ostringstream os;
    const PhysicalParams p = physical();
    os << "# format_version=1\n# command=" << command << "\n";
    os << "# rho1=" << p.rho1 << " rho2=" << p.rho2 << " k=" << p.k << " b=" << p.b
       << " gamma=" << p.gamma << " beta=" << p.beta << " L=" << p.L << "\n";
    os << "# n=" << n << " T=" << (T > 0.0 ? T : default_horizon(p)) << " nt=" << nt
       << " m=" << (m > 0 ? m : std::max(1, n / 3)) << "\n";
    os << "# tol=" << tol << " max_iter=" << max_iter << " init=" << init << " seed=" << seed
       << " samples=" << samples << "\n";
    os << "# damped=" << damped << " lumped_mass=" << lumped_mass << " unweighted_traces="
       << unweighted_traces << " sigma=" << sigma << " tikhonov=" << tikhonov << "\n";
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static double num(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ValidationError("config: key '" + key + "' needs a number, got '" + v + "'");
    }
  }
  static int intval(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const int x = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ValidationError("config: key '" + key + "' needs an integer, got '" + v + "'");
    }
  }
  static bool boolean(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config: key '" + key + "' needs a boolean, got '" + v + "'");
  }
  static std::vector<double> num_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(num(key, trim(tok)));
    if (out.empty()) throw ValidationError("config: key '" + key + "' needs a list");
    return out;
  }
  static std::vector<int> int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (double x : num_list(key, v)) out.push_back(static_cast<int>(x));
    return out;
  }
};

}  // namespace lambeam
