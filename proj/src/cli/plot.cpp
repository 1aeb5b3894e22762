// Copyright 2026 The fedspd Authors
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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fedspd/cli.hpp"

namespace fedspd::cli {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  if (std::fabs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string Escape(const std::string& s) {
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

// Roughly five round-numbered ticks covering [lo, hi].
std::vector<double> NiceTicks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + 1e-9 * step; t += step) {
    ticks.push_back(t);
  }
  return ticks;
}

}  // namespace

std::string RenderSvg(const PlotSpec& plot) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    const double pad = std::max(std::fabs(ymin) * 0.05, 1e-9);
    ymin -= pad;
    ymax += pad;
  } else {
    const double pad = (ymax - ymin) * 0.05;
    ymin -= pad;
    ymax += pad;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << Num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
    << Escape(plot.title) << "</text>\n";
  o << "<rect x=\"" << Num(kLeft) << "\" y=\"" << Num(kTop) << "\" width=\"" << Num(pw)
    << "\" height=\"" << Num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : NiceTicks(xmin, xmax)) {
    o << "<line x1=\"" << Num(px(t)) << "\" y1=\"" << Num(kTop + ph) << "\" x2=\"" << Num(px(t))
      << "\" y2=\"" << Num(kTop + ph + 5) << "\" stroke=\"black\"/>"
      << "<text x=\"" << Num(px(t)) << "\" y=\"" << Num(kTop + ph + 18)
      << "\" text-anchor=\"middle\">" << Tick(t) << "</text>\n";
  }
  for (double t : NiceTicks(ymin, ymax)) {
    o << "<line x1=\"" << Num(kLeft - 5) << "\" y1=\"" << Num(py(t)) << "\" x2=\"" << Num(kLeft)
      << "\" y2=\"" << Num(py(t)) << "\" stroke=\"black\"/>"
      << "<line x1=\"" << Num(kLeft) << "\" y1=\"" << Num(py(t)) << "\" x2=\"" << Num(kLeft + pw)
      << "\" y2=\"" << Num(py(t)) << "\" stroke=\"#dddddd\"/>"
      << "<text x=\"" << Num(kLeft - 8) << "\" y=\"" << Num(py(t) + 4)
      << "\" text-anchor=\"end\">" << Tick(t) << "</text>\n";
  }
  o << "<text x=\"" << Num(kLeft + pw / 2) << "\" y=\"" << Num(kHeight - 16)
    << "\" text-anchor=\"middle\">" << Escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << Num(kTop + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      o << (first ? "" : " ") << Num(px(s.x[i])) << "," << Num(py(s.y[i]));
      first = false;
    }
    o << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << Num(kLeft + pw + 12) << "\" y1=\"" << Num(ly) << "\" x2=\""
      << Num(kLeft + pw + 32) << "\" y2=\"" << Num(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/><text x=\"" << Num(kLeft + pw + 38) << "\" y=\""
      << Num(ly + 4) << "\">" << Escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace fedspd::cli
