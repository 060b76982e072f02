// Copyright 2026 The mpcard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace mpcard::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool step = false;  // draw as a staircase
};

namespace detail {

inline const char* color(std::size_t i) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return kPalette[i % 8];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double width = 800, height = 360;
  double left = 70, right = 150, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::string header(const Frame& f, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, bool x_ticks = true) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) +
                  "\" height=\"" + num(f.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(title) + "</text>\n";
  const double xa = f.left, xb = f.width - f.right, ya = f.top, yb = f.height - f.bottom;
  s += "<path d=\"M" + num(xa) + " " + num(ya) + " L" + num(xa) + " " + num(yb) + " L" + num(xb) +
       " " + num(yb) + "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    s += "<text x=\"" + num(xa - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" +
         tick(yv) + "</text>\n";
    if (!x_ticks) continue;
    s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(yb + 18) + "\" text-anchor=\"middle\">" +
         tick(xv) + "</text>\n";
  }
  s += "<text x=\"" + num((xa + xb) / 2) + "\" y=\"" + num(f.height - 10) +
       "\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((ya + yb) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((ya + yb) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  return s;
}

inline void fit(Frame& f, double lo, double hi, bool y) {
  if (!(lo < hi)) {
    lo = std::isfinite(lo) ? lo - 1.0 : 0.0;
    hi = std::isfinite(hi) ? hi + 1.0 : 1.0;
  }
  (y ? f.y0 : f.x0) = lo;
  (y ? f.y1 : f.x1) = hi;
}

}  // namespace detail

// Polyline chart with a legend on the right. Non-finite points break the line.
inline std::string line_plot(const std::string& title, const std::string& xlabel,
                             const std::string& ylabel, const std::vector<Series>& series) {
  detail::Frame f;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  detail::fit(f, xlo, xhi, false);
  if (ylo < yhi) {
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
  }
  detail::fit(f, ylo, yhi, true);
  std::string out = detail::header(f, title, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    std::string d;
    bool pen = false;
    double prev_y = 0.0;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        pen = false;
        continue;
      }
      if (pen && s.step) d += " L" + detail::num(f.px(s.x[i])) + " " + detail::num(f.py(prev_y));
      d += (pen ? " L" : " M") + detail::num(f.px(s.x[i])) + " " + detail::num(f.py(s.y[i]));
      pen = true;
      prev_y = s.y[i];
    }
    out += "<path d=\"" + d + "\" stroke=\"" + detail::color(k) +
           "\" fill=\"none\" stroke-width=\"1.2\"/>\n";
    const double ly = f.top + 16.0 * static_cast<double>(k);
    const double lx = f.width - f.right + 10;
    out += "<line x1=\"" + detail::num(lx) + "\" y1=\"" + detail::num(ly) + "\" x2=\"" +
           detail::num(lx + 20) + "\" y2=\"" + detail::num(ly) + "\" stroke=\"" + detail::color(k) +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::num(lx + 26) + "\" y=\"" + detail::num(ly + 4) + "\">" +
           detail::escape(s.name) + "</text>\n";
  }
  return out + "</svg>\n";
}

// Grouped bar chart: one group per category, one bar per series.
inline std::string bar_plot(const std::string& title, const std::string& xlabel,
                            const std::string& ylabel, const std::vector<std::string>& categories,
                            const std::vector<Series>& series) {
  detail::Frame f;
  double yhi = 0.0;
  for (const Series& s : series) {
    for (double v : s.y) {
      if (std::isfinite(v)) yhi = std::max(yhi, v);
    }
  }
  detail::fit(f, -0.5, static_cast<double>(categories.size()) - 0.5, false);
  detail::fit(f, 0.0, yhi > 0.0 ? 1.05 * yhi : 1.0, true);
  std::string out = detail::header(f, title, xlabel, ylabel, false);
  const double group = (f.px(1.0) - f.px(0.0)) * 0.8;
  const double bar = series.empty() ? group : group / static_cast<double>(series.size());
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double cx = f.px(static_cast<double>(c));
    out += "<text x=\"" + detail::num(cx) + "\" y=\"" + detail::num(f.height - f.bottom + 18) +
           "\" text-anchor=\"middle\">" + detail::escape(categories[c]) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = c < series[k].y.size() && std::isfinite(series[k].y[c]) ? series[k].y[c] : 0.0;
      const double x = cx - group / 2 + bar * static_cast<double>(k);
      const double y = f.py(v);
      out += "<rect x=\"" + detail::num(x) + "\" y=\"" + detail::num(y) + "\" width=\"" +
             detail::num(bar * 0.9) + "\" height=\"" + detail::num(f.py(0.0) - y) + "\" fill=\"" +
             detail::color(k) + "\"/>\n";
    }
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ly = f.top + 16.0 * static_cast<double>(k);
    const double lx = f.width - f.right + 10;
    out += "<rect x=\"" + detail::num(lx) + "\" y=\"" + detail::num(ly - 6) +
           "\" width=\"20\" height=\"10\" fill=\"" + detail::color(k) + "\"/>\n";
    out += "<text x=\"" + detail::num(lx + 26) + "\" y=\"" + detail::num(ly + 4) + "\">" +
           detail::escape(series[k].name) + "</text>\n";
  }
  return out + "</svg>\n";
}

}  // namespace mpcard::svg
