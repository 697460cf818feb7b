#pragma once

// Plot builders for the planar experiments: trajectory overlays with the
// unsafe disk, data points, acquisition stars and condition-failure
// triangles, and the feasibility heat map.

#include "safesocp/sim.hpp"
#include "safesocp/svg.hpp"

namespace safesocp {

struct PlotFrame {
  double xmin = -5, xmax = 5, ymin = -1, ymax = 9;
};

inline const char* trajectory_palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return colors[i % 6];
}

template <typename Scalar>
void draw_scenario_background(SvgCanvas& svg) {
  const auto [center, radius] = planar_unsafe_disk<Scalar>();
  svg.circle(static_cast<double>(center[0]), static_cast<double>(center[1]),
             static_cast<double>(radius), "#7fbf7f", "#2ca02c", 0.6);
  svg.dot(0.0, 0.0, 3.0, "#555555");  // origin target
}

template <typename Scalar>
void draw_trajectory(SvgCanvas& svg, const Trajectory<Scalar>& traj, const std::string& color,
                     bool dashed = false) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(traj.steps.size() + 1);
  for (const auto& s : traj.steps)
    pts.emplace_back(static_cast<double>(s.x[0]), static_cast<double>(s.x[1]));
  if (traj.final_state.size() >= 2)
    pts.emplace_back(static_cast<double>(traj.final_state[0]),
                     static_cast<double>(traj.final_state[1]));
  svg.polyline(pts, color, 1.8, dashed ? "6,4" : "");
  if (!pts.empty()) svg.dot(pts.front().first, pts.front().second, 4.0, "black");
}

template <typename Scalar>
void draw_condition_failures(SvgCanvas& svg, const Trajectory<Scalar>& traj) {
  for (const auto& s : traj.steps)
    if (!(s.clf_margin > Scalar(0) && s.cbf_margin > Scalar(0)))
      svg.triangle(static_cast<double>(s.x[0]), static_cast<double>(s.x[1]), 4.0, "black");
}

template <typename Scalar>
void draw_dataset(SvgCanvas& svg, const Dataset<Scalar>& ds, const std::string& color,
                  std::size_t first = 0, std::size_t last = SIZE_MAX) {
  for (std::size_t i = first; i < std::min(last, ds.size()); ++i)
    svg.dot(static_cast<double>(ds.point(i)[0]), static_cast<double>(ds.point(i)[1]), 2.0, color);
}

template <typename Scalar>
void draw_acquisitions(SvgCanvas& svg, const Trajectory<Scalar>& traj) {
  for (const auto& a : traj.acquisitions)
    svg.star(static_cast<double>(a.center[0]), static_cast<double>(a.center[1]), 6.0, "black");
}

/// Heat map of the margin conditions: green where both hold, red otherwise,
/// with triangles on failed cells and blue outline where the phase-I value
/// is negative (program strictly feasible).
template <typename Scalar>
std::string feasmap_svg(const std::vector<FeasMapCell<Scalar>>& cells,
                        const GridSpec<Scalar>& grid) {
  const PlotFrame frame{static_cast<double>(grid.box.lo[0]), static_cast<double>(grid.box.hi[0]),
                        static_cast<double>(grid.box.lo[1]), static_cast<double>(grid.box.hi[1])};
  SvgCanvas svg(frame.xmin, frame.xmax, frame.ymin, frame.ymax);
  const double dx = (frame.xmax - frame.xmin) / (grid.counts[0] - 1);
  const double dy = (frame.ymax - frame.ymin) / (grid.counts[1] - 1);
  for (const auto& c : cells) {
    const double x = static_cast<double>(c.x[0]);
    const double y = static_cast<double>(c.x[1]);
    const bool holds = c.margins.holds();
    svg.rect_cell(x - dx / 2, y - dy / 2, x + dx / 2, y + dy / 2, holds ? "#2ca02c" : "#d62728",
                  holds ? 0.45 : 0.30);
    if (!holds && c.phase1_t < Scalar(0)) {
      // conditions failed yet the program is feasible: sufficiency only
      svg.rect_cell(x - dx / 2, y - dy / 2, x + dx / 2, y + dy / 2, "#1f77b4", 0.25);
    }
    if (!holds) svg.triangle(x, y, 2.5, "black");
  }
  draw_scenario_background<Scalar>(svg);
  svg.text_px(10, 20, "green: conditions hold; red: fail; blue overlay: fail but feasible");
  return svg.finish();
}

}  // namespace safesocp
