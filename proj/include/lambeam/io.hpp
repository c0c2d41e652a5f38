#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lambeam/assembly.hpp"
#include "lambeam/errors.hpp"
#include "lambeam/evolution.hpp"

namespace lambeam {

inline constexpr const char* kFormatVersion = "1";

/// Shortest round-trip decimal formatting; keeps output byte-reproducible.
inline std::string fmt_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Trajectory table: one row per time step with the boundary traces.
inline std::string trajectory_csv(const Trajectory& tr, const std::string& header_block) {
  std::string out = header_block;
  out += "t,E,w_L,xi_L,s_L,wt_L,xit_L,st_L\n";
  for (int j = 0; j <= tr.tg.nt; ++j) {
    out += fmt_double(tr.tg.time(j));
    out += ',';
    out += fmt_double(tr.energy(j));
    out += ',';
    out += fmt_double(tr.positions.w(j));
    out += ',';
    out += fmt_double(tr.positions.xi(j));
    out += ',';
    out += fmt_double(tr.positions.s(j));
    out += ',';
    out += fmt_double(tr.velocities.w(j));
    out += ',';
    out += fmt_double(tr.velocities.xi(j));
    out += ',';
    out += fmt_double(tr.velocities.s(j));
    out += '\n';
  }
  return out;
}

inline std::string controls_csv(const TimeGrid& tg, const ControlTriple& u,
                                const std::string& header_block) {
  std::string out = header_block;
  out += "t,u1,u2,u3\n";
  for (int j = 0; j <= tg.nt; ++j) {
    out += fmt_double(tg.time(j));
    out += ',';
    out += fmt_double(u.u1(j));
    out += ',';
    out += fmt_double(u.u2(j));
    out += ',';
    out += fmt_double(u.u3(j));
    out += '\n';
  }
  return out;
}

/// Matrix Market coordinate text (1-based, structural nonzeros only).
/// header_block lines, if given, are re-emitted as %-comments.
inline std::string matrix_market(const Eigen::MatrixXd& a,
                                 const std::string& header_block = "") {
  std::vector<std::string> entries;
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i)
      if (a(i, j) != 0.0)
        entries.push_back(std::to_string(i + 1) + " " + std::to_string(j + 1) + " " +
                          fmt_double(a(i, j)));
  std::string out = "%%MatrixMarket matrix coordinate real general\n";
  for (char c : header_block) out += (c == '#') ? '%' : c;
  out += std::to_string(a.rows()) + " " + std::to_string(a.cols()) + " " +
         std::to_string(entries.size()) + "\n";
  for (const auto& e : entries) {
    out += e;
    out += '\n';
  }
  return out;
}

/// Binary snapshot layout: int64 n (elements), int64 nt, double dt, then
/// nt+1 rows of 6n doubles (the free nodal values of w, xi, s followed by
/// their velocities), row-major, native little-endian IEEE doubles.
inline void write_snapshots(const std::filesystem::path& path, const Trajectory& tr, int n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  const std::int64_t n64 = n, nt64 = tr.tg.nt;
  const double dt = tr.tg.dt();
  out.write(reinterpret_cast<const char*>(&n64), sizeof(n64));
  out.write(reinterpret_cast<const char*>(&nt64), sizeof(nt64));
  out.write(reinterpret_cast<const char*>(&dt), sizeof(dt));
  for (const State& s : tr.states) {
    out.write(reinterpret_cast<const char*>(s.q.data()),
              static_cast<std::streamsize>(sizeof(double) * s.q.size()));
    out.write(reinterpret_cast<const char*>(s.v.data()),
              static_cast<std::streamsize>(sizeof(double) * s.v.size()));
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

struct SnapshotFile {
  std::int64_t n = 0, nt = 0;
  double dt = 0.0;
  std::vector<State> states;
};

inline SnapshotFile read_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open for reading: " + path.string());
  SnapshotFile f;
  in.read(reinterpret_cast<char*>(&f.n), sizeof(f.n));
  in.read(reinterpret_cast<char*>(&f.nt), sizeof(f.nt));
  in.read(reinterpret_cast<char*>(&f.dt), sizeof(f.dt));
  if (!in || f.n <= 0 || f.nt < 0) throw ValidationError("corrupt snapshot header: " + path.string());
  const int nd = static_cast<int>(3 * f.n);
  f.states.resize(static_cast<std::size_t>(f.nt) + 1, State::zero(nd));
  for (auto& s : f.states) {
    in.read(reinterpret_cast<char*>(s.q.data()),
            static_cast<std::streamsize>(sizeof(double) * nd));
    in.read(reinterpret_cast<char*>(s.v.data()),
            static_cast<std::streamsize>(sizeof(double) * nd));
  }
  if (!in) throw ValidationError("truncated snapshot file: " + path.string());
  return f;
}

/// Whitespace-separated text state: 6n numbers, q block then v block.
inline State read_state_text(const std::filesystem::path& path, int dofs) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open initial-state file: " + path.string());
  State s = State::zero(dofs);
  for (int i = 0; i < 2 * dofs; ++i) {
    double x;
    if (!(in >> x))
      throw ValidationError("initial-state file too short (need " + std::to_string(2 * dofs) +
                            " values): " + path.string());
    (i < dofs ? s.q(i) : s.v(i - dofs)) = x;
  }
  return s;
}

}  // namespace lambeam
