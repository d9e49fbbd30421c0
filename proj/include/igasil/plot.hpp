#pragma once

// Self-rendered SVG learning curves.

#include <filesystem>
#include <string>
#include <vector>

namespace igasil {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label = "episodes";
  std::string y_label = "return";
  double x_tick = 1000.0;  // tick spacing is a multiple of this
};

/// Deterministic SVG document with one polyline per series.
std::string render_svg(const std::vector<Series>& series, const PlotOptions& options);

/// Reads (window_end_episode, mean_return) from a metrics CSV. Throws
/// std::runtime_error naming the first column that deviates from the schema.
Series read_metrics_curve(const std::filesystem::path& csv);

/// Mean-return curves of several metrics CSVs, labelled by file name.
std::string plot_metrics(const std::vector<std::filesystem::path>& csvs, const PlotOptions& options = {});

}  // namespace igasil
