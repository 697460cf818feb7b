#pragma once

// CSV serialization for trajectories, acquisition logs, feasibility maps
// and datasets. Doubles are printed with %.17g so a fixed seed reproduces
// byte-identical files; writes go through a temp file + rename.

#include "safesocp/estimation.hpp"
#include "safesocp/feasibility.hpp"
#include "safesocp/sim_types.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace safesocp {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Write content to path atomically (temp file in the same directory, then
/// rename over the target).
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path dir = path.parent_path().empty() ? "." : path.parent_path();
  std::filesystem::create_directories(dir);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename Scalar>
std::string trajectory_csv(const Trajectory<Scalar>& traj) {
  std::ostringstream out;
  if (traj.steps.empty()) return "t\n";
  const int n = static_cast<int>(traj.steps.front().x.size());
  const int m = static_cast<int>(traj.steps.front().u.size());
  out << "t";
  for (int i = 0; i < n; ++i) out << ",x" << i + 1;
  for (int i = 0; i < m; ++i) out << ",u" << i + 1;
  out << ",h,V,phase1_t,clf_margin,cbf_margin,status,dataset_size\n";
  for (const auto& s : traj.steps) {
    out << format_double(static_cast<double>(s.t));
    for (int i = 0; i < n; ++i) out << ',' << format_double(static_cast<double>(s.x[i]));
    for (int i = 0; i < m; ++i) out << ',' << format_double(static_cast<double>(s.u[i]));
    out << ',' << format_double(static_cast<double>(s.h)) << ','
        << format_double(static_cast<double>(s.V)) << ','
        << format_double(static_cast<double>(s.phase1_t)) << ','
        << format_double(static_cast<double>(s.clf_margin)) << ','
        << format_double(static_cast<double>(s.cbf_margin)) << ',' << to_string(s.status) << ','
        << s.dataset_size << '\n';
  }
  return out.str();
}

template <typename Scalar>
std::string acquisitions_csv(const Trajectory<Scalar>& traj) {
  std::ostringstream out;
  const int n = traj.acquisitions.empty() ? 2 : static_cast<int>(traj.acquisitions.front().center.size());
  out << "t";
  for (int i = 0; i < n; ++i) out << ",x" << i + 1;
  out << ",points_added,dataset_size\n";
  for (const auto& a : traj.acquisitions) {
    out << format_double(static_cast<double>(a.t));
    for (int i = 0; i < n; ++i) out << ',' << format_double(static_cast<double>(a.center[i]));
    out << ',' << a.points_added << ',' << a.dataset_size_after << '\n';
  }
  return out.str();
}

template <typename Scalar>
std::string feasmap_csv(const std::vector<FeasMapCell<Scalar>>& cells) {
  std::ostringstream out;
  const int n = cells.empty() ? 2 : static_cast<int>(cells.front().x.size());
  for (int i = 0; i < n; ++i) out << "x" << i + 1 << ',';
  out << "clf_margin,cbf_margin,holds_clf,holds_cbf,phase1_t\n";
  for (const auto& c : cells) {
    for (int i = 0; i < n; ++i) out << format_double(static_cast<double>(c.x[i])) << ',';
    out << format_double(static_cast<double>(c.margins.clf_margin)) << ','
        << format_double(static_cast<double>(c.margins.cbf_margin)) << ','
        << (c.margins.holds_clf ? 1 : 0) << ',' << (c.margins.holds_cbf ? 1 : 0) << ','
        << format_double(static_cast<double>(c.phase1_t)) << '\n';
  }
  return out.str();
}

/// Dataset CSV: state coordinates, f components, g entries row-major.
template <typename Scalar>
std::string dataset_csv(const Dataset<Scalar>& ds) {
  std::ostringstream out;
  const int n = ds.state_dim();
  const int m = ds.input_dim();
  for (int i = 0; i < n; ++i) out << "x" << i + 1 << ',';
  for (int i = 0; i < n; ++i) out << "f" << i + 1 << ',';
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out << "g" << i + 1 << j + 1 << (i + 1 == n && j + 1 == m ? "" : ",");
  out << '\n';
  for (std::size_t k = 0; k < ds.size(); ++k) {
    for (int i = 0; i < n; ++i) out << format_double(static_cast<double>(ds.point(k)[i])) << ',';
    for (int i = 0; i < n; ++i) out << format_double(static_cast<double>(ds.f_value(k)[i])) << ',';
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        out << format_double(static_cast<double>(ds.g_value(k)(i, j)))
            << (i + 1 == n && j + 1 == m ? "" : ",");
    out << '\n';
  }
  return out.str();
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}
}  // namespace detail

/// Read a dataset CSV produced by dataset_csv (header required).
template <typename Scalar>
Dataset<Scalar> read_dataset_csv(const std::filesystem::path& path, int n, int m) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file " + path.string());
  const std::size_t expected = static_cast<std::size_t>(n + n + n * m);
  Dataset<Scalar> ds(n, m);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != expected)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(expected) + " fields");
    Vector<Scalar> x(n), f(n);
    Matrix<Scalar> g(n, m);
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) x[i] = static_cast<Scalar>(std::stod(fields[idx++]));
    for (int i = 0; i < n; ++i) f[i] = static_cast<Scalar>(std::stod(fields[idx++]));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = static_cast<Scalar>(std::stod(fields[idx++]));
    ds.insert(x, f, g);
  }
  return ds;
}

}  // namespace safesocp
