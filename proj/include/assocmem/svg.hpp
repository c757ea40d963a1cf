// Copyright 2026 The assocmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal SVG output: line charts (optionally log-scaled), heatmaps and
// iso-lines traced with marching squares.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "assocmem/types.hpp"

namespace assocmem::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Series {
  std::string name;
  std::vector<double> x, y;
  std::string color;  // empty picks from the palette
  bool dashed = false;
};

struct LinePlot {
  std::string title, xlabel, ylabel;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
  std::vector<double> hlines;  // horizontal reference lines
  int width = 640, height = 420;
};

namespace detail {

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double map(double v, double a, double b) const {
    const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo)) : (v - lo) / (hi - lo);
    return a + t * (b - a);
  }
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(std::log10(lo)); e <= std::floor(std::log10(hi)) + 1e-9; e += 1.0) out.push_back(std::pow(10.0, e));
      return out;
    }
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    return out;
  }
};

inline Axis fit_axis(const std::vector<const std::vector<double>*>& data, bool log, const std::vector<double>& extra = {}) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto take = [&](double v) {
    if (!std::isfinite(v) || (log && v <= 0.0)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (const auto* d : data)
    for (double v : *d) take(v);
  for (double v : extra) take(v);
  if (!std::isfinite(lo)) {
    lo = log ? 1.0 : 0.0;
    hi = log ? 10.0 : 1.0;
  }
  if (hi == lo) {
    if (log) {
      lo /= 2;
      hi *= 2;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  if (!log) {
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return {lo, hi, log};
}

}  // namespace detail

inline std::string render(const LinePlot& plot) {
  const double left = 70, right = plot.width - 150.0, top = 36, bottom = plot.height - 50.0;
  std::vector<const std::vector<double>*> xs, ys;
  for (const auto& s : plot.series) {
    xs.push_back(&s.x);
    ys.push_back(&s.y);
  }
  const auto ax = detail::fit_axis(xs, plot.log_x);
  const auto ay = detail::fit_axis(ys, plot.log_y, plot.hlines);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width << "\" height=\"" << plot.height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(plot.title) << "</text>\n";
  for (double t : ax.ticks()) {
    const double px = ax.map(t, left, right);
    os << "<line x1=\"" << num(px) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px) << "\" y2=\"" << num(bottom)
       << "\" stroke=\"#eee\"/>\n<text x=\"" << num(px) << "\" y=\"" << num(bottom + 15)
       << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t, bottom, top);
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(py) << "\" x2=\"" << num(right) << "\" y2=\"" << num(py)
       << "\" stroke=\"#eee\"/>\n<text x=\"" << num(left - 5) << "\" y=\"" << num(py + 4)
       << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
     << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double h : plot.hlines) {
    if (plot.log_y && h <= 0) continue;
    const double py = ay.map(h, bottom, top);
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(py) << "\" x2=\"" << num(right) << "\" y2=\"" << num(py)
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const std::string color = s.color.empty() ? kPalette[k % kPalette.size()] : s.color;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"5 3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if ((plot.log_x && s.x[i] <= 0) || (plot.log_y && s.y[i] <= 0)) continue;
      os << num(ax.map(s.x[i], left, right)) << ',' << num(ay.map(s.y[i], bottom, top)) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(k) + 8;
    os << "<line x1=\"" << num(right + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(right + 30) << "\" y2=\""
       << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n<text x=\"" << num(right + 34) << "\" y=\""
       << num(ly + 4) << "\">" << escape(s.name) << "</text>\n";
  }
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(plot.height - 12.0)
     << "\" text-anchor=\"middle\">" << escape(plot.xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num((top + bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num((top + bottom) / 2) << ")\">" << escape(plot.ylabel) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

// --- marching squares -------------------------------------------------------------

struct Segment {
  double x0, y0, x1, y1;
};

// Iso-line of `field` (indexed (i, j) over xs[i], ys[j]) at `level`. Saddle
// cells are resolved with the cell-centre average.
inline std::vector<Segment> contour(const std::vector<double>& xs, const std::vector<double>& ys, const Matrix& field,
                                    double level) {
  std::vector<Segment> out;
  const Index nx = static_cast<Index>(xs.size()), ny = static_cast<Index>(ys.size());
  auto lerp = [&](double a, double b, double fa, double fb) { return fa == fb ? 0.5 * (a + b) : a + (level - fa) / (fb - fa) * (b - a); };
  for (Index i = 0; i + 1 < nx; ++i)
    for (Index j = 0; j + 1 < ny; ++j) {
      const double x0 = xs[i], x1 = xs[i + 1], y0 = ys[j], y1 = ys[j + 1];
      const double f00 = field(i, j), f10 = field(i + 1, j), f11 = field(i + 1, j + 1), f01 = field(i, j + 1);
      if (!std::isfinite(f00) || !std::isfinite(f10) || !std::isfinite(f11) || !std::isfinite(f01)) continue;
      const int code = (f00 > level) | ((f10 > level) << 1) | ((f11 > level) << 2) | ((f01 > level) << 3);
      if (code == 0 || code == 15) continue;
      // Edge crossing points: bottom, right, top, left.
      const double bx = lerp(x0, x1, f00, f10), ry = lerp(y0, y1, f10, f11);
      const double tx = lerp(x0, x1, f01, f11), ly = lerp(y0, y1, f00, f01);
      const std::array<std::array<double, 2>, 4> p{{{bx, y0}, {x1, ry}, {tx, y1}, {x0, ly}}};
      auto seg = [&](int a, int b) { out.push_back({p[a][0], p[a][1], p[b][0], p[b][1]}); };
      switch (code) {
        case 1: case 14: seg(3, 0); break;
        case 2: case 13: seg(0, 1); break;
        case 3: case 12: seg(3, 1); break;
        case 4: case 11: seg(1, 2); break;
        case 6: case 9: seg(0, 2); break;
        case 7: case 8: seg(3, 2); break;
        case 5: case 10: {
          const bool centre_high = 0.25 * (f00 + f10 + f11 + f01) > level;
          if ((code == 5) == centre_high) {
            seg(3, 2);
            seg(0, 1);
          } else {
            seg(3, 0);
            seg(1, 2);
          }
          break;
        }
        default: break;
      }
    }
  return out;
}

struct Heatmap {
  std::string title, xlabel, ylabel, colorbar_label;
  std::vector<double> xs, ys;
  Matrix field;             // (i, j) over xs[i], ys[j]
  bool log_color = false;   // colour by log10 of the value
  std::vector<double> contour_levels;
  std::vector<Series> overlays;  // drawn in data coordinates
  int width = 560, height = 480;
};

namespace detail {
// Blue (low) to yellow (high), roughly perceptual.
inline std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  static const std::array<std::array<double, 3>, 5> stops{
      {{13, 8, 135}, {84, 2, 163}, {185, 50, 137}, {249, 142, 9}, {240, 249, 33}}};
  const double pos = t * 4.0;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(pos), 3);
  const double f = pos - static_cast<double>(k);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(stops[k][0] + f * (stops[k + 1][0] - stops[k][0])),
                static_cast<int>(stops[k][1] + f * (stops[k + 1][1] - stops[k][1])),
                static_cast<int>(stops[k][2] + f * (stops[k + 1][2] - stops[k][2])));
  return buf;
}
}  // namespace detail

inline std::string render(const Heatmap& hm) {
  const double left = 70, right = hm.width - 90.0, top = 36, bottom = hm.height - 50.0;
  const Index nx = static_cast<Index>(hm.xs.size()), ny = static_cast<Index>(hm.ys.size());
  auto value = [&](double v) { return hm.log_color ? (v > 0 ? std::log10(v) : std::numeric_limits<double>::quiet_NaN()) : v; };
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Index i = 0; i < hm.field.size(); ++i) {
    const double v = value(hm.field.data()[i]);
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi == lo) hi = lo + 1;
  const detail::Axis ax{hm.xs.front(), hm.xs.back(), false}, ay{hm.ys.front(), hm.ys.back(), false};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << hm.width << "\" height=\"" << hm.height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(hm.title) << "</text>\n<g shape-rendering=\"crispEdges\">\n";
  // Cells centred on grid points.
  const double cw = (right - left) / static_cast<double>(nx), ch = (bottom - top) / static_cast<double>(ny);
  for (Index i = 0; i < nx; ++i)
    for (Index j = 0; j < ny; ++j) {
      const double v = value(hm.field(i, j));
      const std::string fill = std::isfinite(v) ? detail::ramp((v - lo) / (hi - lo)) : "#888888";
      os << "<rect x=\"" << num(left + cw * static_cast<double>(i)) << "\" y=\""
         << num(bottom - ch * static_cast<double>(j + 1)) << "\" width=\"" << num(cw + 0.3) << "\" height=\""
         << num(ch + 0.3) << "\" fill=\"" << fill << "\"/>\n";
    }
  os << "</g>\n";
  const double half_x = 0.5 * (hm.xs.back() - hm.xs.front()) / std::max<Index>(nx - 1, 1);
  const double half_y = 0.5 * (hm.ys.back() - hm.ys.front()) / std::max<Index>(ny - 1, 1);
  const detail::Axis px{hm.xs.front() - half_x, hm.xs.back() + half_x, false};
  const detail::Axis py{hm.ys.front() - half_y, hm.ys.back() + half_y, false};
  for (double level : hm.contour_levels) {
    os << "<path fill=\"none\" stroke=\"white\" stroke-width=\"0.8\" d=\"";
    for (const auto& s : contour(hm.xs, hm.ys, hm.field, level))
      os << 'M' << num(px.map(s.x0, left, right)) << ',' << num(py.map(s.y0, bottom, top)) << 'L'
         << num(px.map(s.x1, left, right)) << ',' << num(py.map(s.y1, bottom, top));
    os << "\"/>\n";
  }
  for (std::size_t k = 0; k < hm.overlays.size(); ++k) {
    const auto& s = hm.overlays[k];
    const std::string color = s.color.empty() ? kPalette[(k + 1) % kPalette.size()] : s.color;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      const double X = std::clamp(s.x[i], px.lo, px.hi), Y = std::clamp(s.y[i], py.lo, py.hi);
      os << num(px.map(X, left, right)) << ',' << num(py.map(Y, bottom, top)) << ' ';
    }
    os << "\"/>\n<text x=\"" << num(left + 6) << "\" y=\"" << num(top + 14.0 * static_cast<double>(k + 1))
       << "\" fill=\"" << color << "\">" << escape(s.name) << "</text>\n";
  }
  for (double t : ax.ticks())
    os << "<text x=\"" << num(px.map(t, left, right)) << "\" y=\"" << num(bottom + 15) << "\" text-anchor=\"middle\">"
       << num(t) << "</text>\n";
  for (double t : ay.ticks())
    os << "<text x=\"" << num(left - 5) << "\" y=\"" << num(py.map(t, bottom, top) + 4) << "\" text-anchor=\"end\">"
       << num(t) << "</text>\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
     << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  // Colour bar.
  for (int k = 0; k < 50; ++k)
    os << "<rect x=\"" << num(right + 20) << "\" y=\"" << num(bottom - (k + 1) * (bottom - top) / 50) << "\" width=\"14\" height=\""
       << num((bottom - top) / 50 + 0.3) << "\" fill=\"" << detail::ramp((k + 0.5) / 50.0) << "\"/>\n";
  const std::string lo_label = hm.log_color ? "1e" + num(lo) : num(lo);
  const std::string hi_label = hm.log_color ? "1e" + num(hi) : num(hi);
  os << "<text x=\"" << num(right + 38) << "\" y=\"" << num(bottom) << "\">" << lo_label << "</text>\n<text x=\""
     << num(right + 38) << "\" y=\"" << num(top + 8) << "\">" << hi_label << "</text>\n";
  os << "<text x=\"" << num(right + 27) << "\" y=\"" << num(top - 6) << "\" text-anchor=\"middle\">"
     << escape(hm.colorbar_label) << "</text>\n";
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(hm.height - 12.0) << "\" text-anchor=\"middle\">"
     << escape(hm.xlabel) << "</text>\n<text x=\"16\" y=\"" << num((top + bottom) / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << num((top + bottom) / 2) << ")\">" << escape(hm.ylabel)
     << "</text>\n</svg>\n";
  return os.str();
}

}  // namespace assocmem::svg
