#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "gla/tensor.hpp"

namespace gla {

/// Per-epoch metric rows plus a final summary. Wall-clock time is kept apart
/// from the metric rows so that metrics.csv is byte-stable across reruns.
struct RunReport {
  std::vector<std::string> columns;  // excluding the leading `epoch`
  std::vector<std::vector<double>> rows;
  std::vector<double> wall_clock_s;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;

  explicit RunReport(std::vector<std::string> cols = {}) : columns(std::move(cols)) {}

  void add_row(std::vector<double> values, double wall_clock);
  std::size_t epochs() const noexcept { return rows.size(); }
  /// Column `name` of the last row; throws if absent.
  double last(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;

  /// `epoch,<columns>` then one line per row, %.9g formatting.
  void write_csv(const std::filesystem::path& path) const;
  void write_timing_csv(const std::filesystem::path& path) const;
  void write_summary_json(const std::filesystem::path& path) const;
};

/// %.9g, the textual float format shared by every CSV this project writes.
std::string format_double(double v);

/// `x0,x1,series` rows for 2D scatter plots.
struct ScatterSeries {
  std::string name;
  const Tensor* points;
};
void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterSeries>& series);

}  // namespace gla
