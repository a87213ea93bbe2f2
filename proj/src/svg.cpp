#include "timberlens/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace timberlens::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string comment_safe(std::string s) {
  // "--" may not appear inside an XML comment.
  for (std::size_t i = s.find("--"); i != std::string::npos; i = s.find("--", i)) s.replace(i, 2, "- ");
  return s;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
  return out;
}

}  // namespace

std::string escape_xml(const std::string& s) {
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

std::string render(const Plot& plot) {
  auto tx = [&](double x) { return plot.log2_x ? std::log2(std::max(x, 1e-300)) : x; };

  Axis ax{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Axis ay = ax;
  for (const auto& s : plot.series) {
    for (const auto* pts : {&s.points, &s.upper}) {
      for (const auto& [x, y] : *pts) {
        if (!std::isfinite(tx(x)) || !std::isfinite(y)) continue;
        ax.include(tx(x));
        ay.include(y);
      }
    }
  }
  if (!std::isfinite(ax.lo)) ax = {0.0, 1.0};
  if (!std::isfinite(ay.lo)) ay = {0.0, 1.0};
  if (ax.hi - ax.lo < 1e-12) ax = {ax.lo - 0.5, ax.hi + 0.5};
  if (ay.hi - ay.lo < 1e-12) ay = {ay.lo - 0.5, ay.hi + 0.5};
  const double pad_y = 0.05 * (ay.hi - ay.lo);
  ay.lo -= pad_y;
  ay.hi += pad_y;

  const double left = 70, right = 20 + 150, top = 40, bottom = 55;
  const double pw = plot.width - left - right, ph = plot.height - top - bottom;
  auto sx = [&](double x) { return left + (tx(x) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - ay.lo) / (ay.hi - ay.lo)) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(plot.width) + "\" height=\"" +
       num(plot.height) + "\" viewBox=\"0 0 " + num(plot.width) + " " + num(plot.height) + "\">\n";
  for (const auto& s : plot.series) {
    o += "<!-- data series=\"" + comment_safe(s.name) + "\"\nx,y" + (s.upper.empty() ? "" : ",upper") + "\n";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      o += num(s.points[i].first) + "," + num(s.points[i].second);
      if (i < s.upper.size()) o += "," + num(s.upper[i].second);
      o += "\n";
    }
    o += "-->\n";
  }
  o += "<rect x=\"0\" y=\"0\" width=\"" + num(plot.width) + "\" height=\"" + num(plot.height) +
       "\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       escape_xml(plot.title) + "</text>\n";
  o += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : ticks(ax.lo, ax.hi)) {
    const double x = left + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    const std::string label = plot.log2_x ? num(std::exp2(t)) : num(t);
    o += "<line x1=\"" + num(x) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(x) + "\" y2=\"" +
         num(top + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(x) + "\" y=\"" + num(top + ph + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + escape_xml(label) + "</text>\n";
  }
  for (double t : ticks(ay.lo, ay.hi)) {
    const double y = sy(t);
    o += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left) + "\" y2=\"" + num(y) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(left - 8) + "\" y=\"" + num(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + escape_xml(num(t)) + "</text>\n";
  }
  o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(plot.height - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape_xml(plot.x_label) + "</text>\n";
  o += "<text transform=\"translate(16," + num(top + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
       escape_xml(plot.y_label) + "</text>\n";

  int legend = 0;
  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const std::string color = kPalette[si % std::size(kPalette)];
    if (s.style == Style::kBand && !s.points.empty() && s.upper.size() == s.points.size()) {
      std::string d;
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        d += (i ? " L" : "M") + num(sx(s.points[i].first)) + " " + num(sy(s.points[i].second));
      }
      for (std::size_t i = s.upper.size(); i-- > 0;) {
        d += " L" + num(sx(s.upper[i].first)) + " " + num(sy(s.upper[i].second));
      }
      o += "<path d=\"" + d + " Z\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    } else if (s.style == Style::kLine && !s.points.empty()) {
      std::string pts;
      for (const auto& [x, y] : s.points) pts += num(sx(x)) + "," + num(sy(y)) + " ";
      o += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    } else {
      for (const auto& [x, y] : s.points) {
        o += "<circle cx=\"" + num(sx(x)) + "\" cy=\"" + num(sy(y)) + "\" r=\"2.5\" fill=\"" + color +
             "\" fill-opacity=\"0.7\"/>\n";
      }
    }
    if (s.name.empty()) continue;
    const double ly = top + 12 + 16 * legend++;
    const double lx = left + pw + 12;
    o += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly - 8) + "\" width=\"12\" height=\"8\" fill=\"" + color + "\"/>\n";
    o += "<text x=\"" + num(lx + 16) + "\" y=\"" + num(ly) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
         escape_xml(s.name) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace timberlens::svg
