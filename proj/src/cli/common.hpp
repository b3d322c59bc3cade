#pragma once

// Helpers shared by the subcommand implementations.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hyperme/cli/bundle.hpp"
#include "hyperme/hyper_me.hpp"

namespace hyperme::cli::detail {

inline Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json to_json(std::span<const double> v) { return Json(std::vector<double>(v.begin(), v.end())); }

/// Appends the elapsed time of a phase to the bundle on destruction.
class PhaseTimer {
 public:
  PhaseTimer(Bundle& bundle, std::string phase)
      : bundle_(bundle), phase_(std::move(phase)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    bundle_.timings.emplace_back(phase_,
                                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
  }

 private:
  Bundle& bundle_;
  std::string phase_;
  std::chrono::steady_clock::time_point start_;
};

/// pi / g^{1/2}, i.e. e^{exponent} / zeta, without overflow.
inline double normalized_scalar(const HyperDistribution& h, std::size_t k) {
  return h.exponent[k] == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(h.exponent[k] - h.log_zeta);
}

/// Least-squares slope of log y against log x over entries with x, y > 0.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::nan("");
  const double dn = static_cast<double>(n);
  return (sxy - sx * sy / dn) / (sxx - sx * sx / dn);
}

inline void add_coordinate_columns(Table& t, const ParameterGrid& grid) {
  for (const Axis& a : grid.axes()) t.add_column(a.name(), "parameter");
}

inline void append_coords(std::vector<Json>& row, const ParameterGrid& grid, std::size_t k) {
  for (double c : grid.coords(k)) row.emplace_back(c);
}

}  // namespace hyperme::cli::detail
