#pragma once

// Static SVG 1.1 rendering of a centile chart, with optional patient
// trajectories drawn over it.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zikq/estimator.hpp"

namespace zikq {

struct Trajectory {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (age, score)
};

struct SvgOptions {
  int width = 800;
  int height = 500;
  std::string title = "Reference centile chart";
  std::vector<Trajectory> overlays;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace detail

/// One path per level (missing cells break it into separate subpaths),
/// axes in years and score units, and one marked path per overlay.
inline std::string render_chart_svg(const CentileChart& chart, const SvgOptions& options = {}) {
  require(!chart.age_grid.empty() && !chart.tau_levels.empty(), ErrorKind::InvalidParameter,
          "cannot plot an empty chart");
  const double left = 70, right = 90, top = 40, bottom = 55;
  const double pw = options.width - left - right;
  const double ph = options.height - top - bottom;

  double xmin = chart.age_grid.front(), xmax = chart.age_grid.back();
  double ymax = 0.0;
  for (const auto& row : chart.values)
    for (const auto& v : row)
      if (v) ymax = std::max(ymax, *v);
  for (const auto& t : options.overlays)
    for (const auto& [a, y] : t.points) {
      xmin = std::min(xmin, a);
      xmax = std::max(xmax, a);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= 0.0) ymax = 1.0;
  const double ystep = detail::nice_step(ymax, 6);
  ymax = std::ceil(ymax / ystep) * ystep;

  auto X = [&](double a) { return left + (a - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double y) { return top + ph - y / ymax * ph; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << options.width
      << "\" height=\"" << options.height << "\" viewBox=\"0 0 " << options.width << ' '
      << options.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << detail::num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << detail::xml_escape(options.title) << "</text>\n";

  // Axes and ticks.
  svg << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
      << "<line x1=\"" << detail::num(left) << "\" y1=\"" << detail::num(top + ph) << "\" x2=\""
      << detail::num(left + pw) << "\" y2=\"" << detail::num(top + ph) << "\"/>\n"
      << "<line x1=\"" << detail::num(left) << "\" y1=\"" << detail::num(top) << "\" x2=\""
      << detail::num(left) << "\" y2=\"" << detail::num(top + ph) << "\"/>\n</g>\n";
  svg << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const double xstep = detail::nice_step(xmax - xmin, 8);
  for (double a = std::ceil(xmin / xstep) * xstep; a <= xmax + 1e-9; a += xstep) {
    svg << "<line x1=\"" << detail::num(X(a)) << "\" y1=\"" << detail::num(top + ph) << "\" x2=\""
        << detail::num(X(a)) << "\" y2=\"" << detail::num(top + ph + 5) << "\" stroke=\"black\"/>"
        << "<text x=\"" << detail::num(X(a)) << "\" y=\"" << detail::num(top + ph + 18)
        << "\" text-anchor=\"middle\">" << detail::num(a) << "</text>\n";
  }
  for (double y = 0.0; y <= ymax + 1e-9; y += ystep) {
    svg << "<line x1=\"" << detail::num(left - 5) << "\" y1=\"" << detail::num(Y(y)) << "\" x2=\""
        << detail::num(left) << "\" y2=\"" << detail::num(Y(y)) << "\" stroke=\"black\"/>"
        << "<text x=\"" << detail::num(left - 8) << "\" y=\"" << detail::num(Y(y) + 4)
        << "\" text-anchor=\"end\">" << detail::num(y) << "</text>\n";
  }
  svg << "</g>\n"
      << "<text x=\"" << detail::num(left + pw / 2) << "\" y=\"" << detail::num(options.height - 12.0)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">Age (years)</text>\n"
      << "<text transform=\"translate(18," << detail::num(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">Score</text>\n";

  // Centile curves, lightest at the extremes.
  svg << "<g class=\"centiles\" fill=\"none\" stroke-width=\"1.8\">\n";
  for (std::size_t l = 0; l < chart.tau_levels.size(); ++l) {
    const double tau = chart.tau_levels[l];
    const int shade = static_cast<int>(40 + 160 * std::abs(tau - 0.5) * 2);
    std::string d;
    bool open = false;
    double last_x = 0, last_y = 0;
    for (std::size_t a = 0; a < chart.age_grid.size(); ++a) {
      const auto& v = chart.values[l][a];
      if (!v) {
        open = false;
        continue;
      }
      last_x = X(chart.age_grid[a]);
      last_y = Y(*v);
      d += (open ? " L" : (d.empty() ? "M" : " M")) + detail::num(last_x) + ',' + detail::num(last_y);
      open = true;
    }
    svg << "<path class=\"centile\" data-tau=\"" << tau << "\" stroke=\"rgb(" << shade << ',' << shade
        << ",230)\" d=\"" << d << "\"/>\n";
    if (!d.empty()) {
      svg << "<text x=\"" << detail::num(last_x + 4) << "\" y=\"" << detail::num(last_y + 4)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::num(tau * 100.0) << "%</text>\n";
    }
  }
  svg << "</g>\n";

  if (!options.overlays.empty()) {
    static const char* colors[] = {"#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    svg << "<g class=\"overlays\" stroke-width=\"2\">\n";
    for (std::size_t i = 0; i < options.overlays.size(); ++i) {
      const auto& t = options.overlays[i];
      const char* color = colors[i % 5];
      std::string d;
      for (const auto& [a, y] : t.points)
        d += (d.empty() ? "M" : " L") + detail::num(X(a)) + ',' + detail::num(Y(y));
      svg << "<path class=\"trajectory\" fill=\"none\" stroke=\"" << color << "\" d=\"" << d << "\">"
          << "<title>" << detail::xml_escape(t.label) << "</title></path>\n";
      for (const auto& [a, y] : t.points)
        svg << "<circle cx=\"" << detail::num(X(a)) << "\" cy=\"" << detail::num(Y(y))
            << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace zikq
