#include "gla/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace gla {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void RunReport::add_row(std::vector<double> values, double wall_clock) {
  if (values.size() != columns.size())
    throw ShapeError("RunReport: row has " + std::to_string(values.size()) + " values for " +
                     std::to_string(columns.size()) + " columns");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("RunReport: non-finite metric");
  rows.push_back(std::move(values));
  wall_clock_s.push_back(wall_clock);
}

std::vector<double> RunReport::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::invalid_argument("RunReport: no column '" + name + "'");
  const auto k = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[k]);
  return out;
}

double RunReport::last(const std::string& name) const {
  auto c = column(name);
  if (c.empty()) throw std::logic_error("RunReport: no rows");
  return c.back();
}

void RunReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "epoch";
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << (i + 1);
    for (double v : rows[i]) os << ',' << format_double(v);
    os << '\n';
  }
}

void RunReport::write_timing_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "epoch,wall_clock_s\n";
  for (std::size_t i = 0; i < wall_clock_s.size(); ++i)
    os << (i + 1) << ',' << format_double(wall_clock_s[i]) << '\n';
}

void RunReport::write_summary_json(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["epochs"] = rows.size();
  j["summary"] = summary;
  j["config"] = config;
  os << j.dump(2) << '\n';
}

void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterSeries>& series) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "x0,x1,series\n";
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.points->rows(); ++i)
      os << format_double((*s.points)(i, 0)) << ',' << format_double((*s.points)(i, 1)) << ','
         << s.name << '\n';
}

}  // namespace gla
