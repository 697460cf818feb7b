#pragma once

// Minimal SVG 1.1 writer restricted to rect, circle, path and text, with a
// world-to-pixel transform (y axis up in world coordinates). No plotting
// dependency; geometry written here mirrors the CSV outputs.

#include "safesocp/core.hpp"
#include "safesocp/io.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace safesocp {

class SvgCanvas {
 public:
  SvgCanvas(double world_xmin, double world_xmax, double world_ymin, double world_ymax,
            int width_px = 720, int height_px = 720, int margin_px = 40)
      : xmin_(world_xmin), xmax_(world_xmax), ymin_(world_ymin), ymax_(world_ymax),
        w_(width_px), h_(height_px), margin_(margin_px) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << w_
          << "\" height=\"" << h_ << "\" viewBox=\"0 0 " << w_ << ' ' << h_ << "\">\n";
    body_ << "<rect x=\"0\" y=\"0\" width=\"" << w_ << "\" height=\"" << h_
          << "\" fill=\"white\"/>\n";
  }

  double px(double wx) const {
    return margin_ + (wx - xmin_) / (xmax_ - xmin_) * (w_ - 2 * margin_);
  }
  double py(double wy) const {
    return h_ - margin_ - (wy - ymin_) / (ymax_ - ymin_) * (h_ - 2 * margin_);
  }

  void circle(double wx, double wy, double world_radius, const std::string& fill,
              const std::string& stroke = "none", double opacity = 1.0) {
    const double rpx = world_radius / (xmax_ - xmin_) * (w_ - 2 * margin_);
    body_ << "<circle cx=\"" << fmt(px(wx)) << "\" cy=\"" << fmt(py(wy)) << "\" r=\"" << fmt(rpx)
          << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" fill-opacity=\""
          << fmt(opacity) << "\"/>\n";
  }

  void dot(double wx, double wy, double radius_px, const std::string& fill) {
    body_ << "<circle cx=\"" << fmt(px(wx)) << "\" cy=\"" << fmt(py(wy)) << "\" r=\""
          << fmt(radius_px) << "\" fill=\"" << fill << "\"/>\n";
  }

  void rect_cell(double wx0, double wy0, double wx1, double wy1, const std::string& fill,
                 double opacity = 1.0) {
    const double x = px(wx0), y = py(wy1);
    body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(px(wx1) - x)
          << "\" height=\"" << fmt(py(wy0) - y) << "\" fill=\"" << fill << "\" fill-opacity=\""
          << fmt(opacity) << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& world_pts, const std::string& stroke,
                double width_px = 1.5, const std::string& dash = "") {
    if (world_pts.empty()) return;
    body_ << "<path d=\"";
    for (std::size_t i = 0; i < world_pts.size(); ++i)
      body_ << (i == 0 ? 'M' : 'L') << fmt(px(world_pts[i].first)) << ' '
            << fmt(py(world_pts[i].second));
    body_ << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width_px)
          << '"';
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << '"';
    body_ << "/>\n";
  }

  /// Downward triangle marker.
  void triangle(double wx, double wy, double size_px, const std::string& fill) {
    const double x = px(wx), y = py(wy), s = size_px;
    body_ << "<path d=\"M" << fmt(x - s) << ' ' << fmt(y - s) << " L" << fmt(x + s) << ' '
          << fmt(y - s) << " L" << fmt(x) << ' ' << fmt(y + s) << " Z\" fill=\"" << fill
          << "\"/>\n";
  }

  /// Four-point star marker.
  void star(double wx, double wy, double size_px, const std::string& fill) {
    const double x = px(wx), y = py(wy), s = size_px, t = size_px * 0.35;
    body_ << "<path d=\"M" << fmt(x) << ' ' << fmt(y - s) << " L" << fmt(x + t) << ' ' << fmt(y - t)
          << " L" << fmt(x + s) << ' ' << fmt(y) << " L" << fmt(x + t) << ' ' << fmt(y + t) << " L"
          << fmt(x) << ' ' << fmt(y + s) << " L" << fmt(x - t) << ' ' << fmt(y + t) << " L"
          << fmt(x - s) << ' ' << fmt(y) << " L" << fmt(x - t) << ' ' << fmt(y - t) << " Z\" fill=\""
          << fill << "\"/>\n";
  }

  void text(double wx, double wy, const std::string& content, int font_px = 14,
            const std::string& fill = "black") {
    body_ << "<text x=\"" << fmt(px(wx)) << "\" y=\"" << fmt(py(wy)) << "\" font-size=\""
          << font_px << "\" fill=\"" << fill << "\">" << content << "</text>\n";
  }

  void text_px(double x, double y, const std::string& content, int font_px = 14) {
    body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << font_px
          << "\" fill=\"black\">" << content << "</text>\n";
  }

  std::string finish() const { return body_.str() + "</svg>\n"; }

  void save(const std::filesystem::path& path) const { write_file_atomic(path, finish()); }

 private:
  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
  }

  double xmin_, xmax_, ymin_, ymax_;
  int w_, h_, margin_;
  std::ostringstream body_;
};

}  // namespace safesocp
