#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadcast/contact_map.hpp"
#include "roadcast/sim.hpp"

namespace roadcast::io {

struct CsvError : std::runtime_error {
  CsvError(int line, const std::string& what) : std::runtime_error(what), line(line) {}
  int line;  // 1-based line number in the file
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trace CSV: "time_s,vehicle_id,ap_id,event", event in {arrive, depart},
// times non-decreasing.
std::vector<map::ContactRecord> read_trace(std::istream& in);
std::vector<map::ContactRecord> read_trace_file(const std::string& path);
void write_trace(std::ostream& out, std::span<const map::ContactRecord> trace);

// Contact-map CSV: "from_ap,to_ap,count", rows sorted by (from_ap, to_ap).
map::ContactGraph read_map(std::istream& in);
map::ContactGraph read_map_file(const std::string& path);
void write_map(std::ostream& out, const map::ContactGraph& graph);
void write_map_file(const std::string& path, const map::ContactGraph& graph);

// Report CSV columns, fixed order.
extern const std::array<const char*, 10> kMetricColumns;
double metric_value(const sim::MetricsReport& m, std::size_t column);

struct ReportRow {
  std::string run_id;
  std::string strategy;
  std::uint64_t seed = 0;
  sim::MetricsReport metrics;
};

std::string report_header();
std::string format_report_row(const ReportRow& row);
std::vector<ReportRow> read_report(std::istream& in);
std::vector<ReportRow> read_report_file(const std::string& path);

struct StrategySummary {
  std::string strategy;
  int runs = 0;
  std::array<double, 10> mean{};
  std::array<double, 10> stddev{};  // sample standard deviation, 0 for n <= 1
};

// Per-strategy statistics, strategies sorted alphabetically.
std::vector<StrategySummary> summarize(std::span<const ReportRow> rows);
std::string format_summary(std::span<const StrategySummary> summaries);

}  // namespace roadcast::io
