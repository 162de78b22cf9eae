#pragma once

// Dependency-free SVG line charts for run comparisons.

#include "stephint/types.hpp"

#include <filesystem>

namespace stephint {

struct ChartSeries {
  std::string name;
  std::vector<Scalar> xs;
  std::vector<Scalar> ys;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ChartSeries> series;
  bool log2_x = false;  // for pass@k curves
  int width = 880;
  int height = 520;
};

// Writes a standalone SVG file.  Throws ConfigError on an empty chart and
// DataError on IO failure.
void write_line_chart(const ChartSpec& spec, const std::filesystem::path& path);

}  // namespace stephint
