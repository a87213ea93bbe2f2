#pragma once

#include <string>
#include <utility>
#include <vector>

namespace timberlens::svg {

enum class Style { kLine, kPoints, kBand };

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  Style style = Style::kLine;
  // Band series carry the upper edge here; `points` is the lower edge.
  std::vector<std::pair<double, double>> upper;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false;
  std::vector<Series> series;
  double width = 640, height = 420;
};

/// Standalone SVG document. Every series is also written as a CSV table
/// inside an XML comment so the plotted numbers stay machine-readable.
std::string render(const Plot& plot);

std::string escape_xml(const std::string& s);

}  // namespace timberlens::svg
