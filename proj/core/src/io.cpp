#include "roadcast/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace roadcast::io {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_double(const std::string& s, int line, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvError(line, std::string("bad ") + what + " value '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, int line, const char* what) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvError(line, std::string("bad ") + what + " value '" + s + "'");
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

std::vector<map::ContactRecord> read_trace(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw CsvError(1, "empty trace file");
  ++line_no;
  if (split_csv(line) != std::vector<std::string>{"time_s", "vehicle_id", "ap_id", "event"})
    throw CsvError(line_no, "unexpected trace header '" + line + "'");

  std::vector<map::ContactRecord> trace;
  double last_time = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 4) throw CsvError(line_no, "expected 4 fields");
    map::ContactRecord rec;
    rec.time_s = parse_double(fields[0], line_no, "time_s");
    rec.vehicle = fields[1];
    rec.ap = fields[2];
    if (fields[3] == "arrive")
      rec.event = map::ContactEvent::Arrive;
    else if (fields[3] == "depart")
      rec.event = map::ContactEvent::Depart;
    else
      throw CsvError(line_no, "bad event token '" + fields[3] + "'");
    if (rec.vehicle.empty()) throw CsvError(line_no, "empty vehicle_id");
    if (rec.ap.empty()) throw CsvError(line_no, "empty ap_id");
    if (rec.time_s < last_time) throw CsvError(line_no, "times must be non-decreasing");
    last_time = rec.time_s;
    trace.push_back(std::move(rec));
  }
  return trace;
}

std::vector<map::ContactRecord> read_trace_file(const std::string& path) {
  auto in = open_input(path);
  return read_trace(in);
}

void write_trace(std::ostream& out, std::span<const map::ContactRecord> trace) {
  out << "time_s,vehicle_id,ap_id,event\n";
  char buf[64];
  for (const auto& rec : trace) {
    std::snprintf(buf, sizeof buf, "%.3f", rec.time_s);
    out << buf << ',' << rec.vehicle << ',' << rec.ap << ','
        << (rec.event == map::ContactEvent::Arrive ? "arrive" : "depart") << '\n';
  }
}

map::ContactGraph read_map(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw CsvError(1, "empty map file");
  ++line_no;
  if (split_csv(line) != std::vector<std::string>{"from_ap", "to_ap", "count"})
    throw CsvError(line_no, "unexpected map header '" + line + "'");

  map::ContactGraph graph;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3) throw CsvError(line_no, "expected 3 fields");
    if (fields[0].empty() || fields[1].empty()) throw CsvError(line_no, "empty AP id");
    if (fields[0] == fields[1]) throw CsvError(line_no, "self-transition row");
    graph.add_count(fields[0], fields[1], parse_u64(fields[2], line_no, "count"));
  }
  return graph;
}

map::ContactGraph read_map_file(const std::string& path) {
  auto in = open_input(path);
  return read_map(in);
}

void write_map(std::ostream& out, const map::ContactGraph& graph) {
  out << "from_ap,to_ap,count\n";
  // counts() iterates the underlying ordered container: sorted by (from, to)
  for (const auto& [edge, count] : graph.counts())
    out << edge.first << ',' << edge.second << ',' << count << '\n';
}

void write_map_file(const std::string& path, const map::ContactGraph& graph) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_map(out, graph);
  if (!out.flush()) throw IoError("failed writing " + path);
}

const std::array<const char*, 10> kMetricColumns = {
    "cache_hit_bytes_ratio", "completion_fraction", "mean_completion_s",
    "backhaul_bytes",        "lan_bytes",           "wireless_bytes",
    "wasted_prefetch_bytes", "duplicate_pieces",    "evictions",
    "declined_prefetches",
};

double metric_value(const sim::MetricsReport& m, std::size_t column) {
  switch (column) {
    case 0: return m.cache_hit_bytes_ratio;
    case 1: return m.completion_fraction;
    case 2: return m.mean_completion_s;
    case 3: return m.backhaul_bytes;
    case 4: return m.lan_bytes;
    case 5: return m.wireless_bytes;
    case 6: return m.wasted_prefetch_bytes;
    case 7: return static_cast<double>(m.duplicate_pieces);
    case 8: return static_cast<double>(m.evictions);
    case 9: return static_cast<double>(m.declined_prefetches);
  }
  throw std::out_of_range("metric column");
}

std::string report_header() {
  std::string header = "run_id,strategy,seed";
  for (const char* column : kMetricColumns) {
    header += ',';
    header += column;
  }
  return header;
}

std::string format_report_row(const ReportRow& row) {
  std::string out = row.run_id + ',' + row.strategy + ',' + std::to_string(row.seed);
  char buf[64];
  for (std::size_t i = 0; i < kMetricColumns.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.6f", metric_value(row.metrics, i));
    out += buf;
  }
  return out;
}

std::vector<ReportRow> read_report(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw CsvError(1, "empty report file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != report_header()) throw CsvError(line_no, "report header mismatch");

  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3 + kMetricColumns.size())
      throw CsvError(line_no, "wrong field count");
    ReportRow row;
    row.run_id = fields[0];
    row.strategy = fields[1];
    row.seed = parse_u64(fields[2], line_no, "seed");
    sim::MetricsReport& m = row.metrics;
    m.cache_hit_bytes_ratio = parse_double(fields[3], line_no, kMetricColumns[0]);
    m.completion_fraction = parse_double(fields[4], line_no, kMetricColumns[1]);
    m.mean_completion_s = parse_double(fields[5], line_no, kMetricColumns[2]);
    m.backhaul_bytes = parse_double(fields[6], line_no, kMetricColumns[3]);
    m.lan_bytes = parse_double(fields[7], line_no, kMetricColumns[4]);
    m.wireless_bytes = parse_double(fields[8], line_no, kMetricColumns[5]);
    m.wasted_prefetch_bytes = parse_double(fields[9], line_no, kMetricColumns[6]);
    m.duplicate_pieces =
        static_cast<std::uint64_t>(parse_double(fields[10], line_no, kMetricColumns[7]));
    m.evictions = static_cast<std::uint64_t>(parse_double(fields[11], line_no, kMetricColumns[8]));
    m.declined_prefetches =
        static_cast<std::uint64_t>(parse_double(fields[12], line_no, kMetricColumns[9]));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ReportRow> read_report_file(const std::string& path) {
  auto in = open_input(path);
  return read_report(in);
}

std::vector<StrategySummary> summarize(std::span<const ReportRow> rows) {
  std::map<std::string, std::vector<const ReportRow*>> groups;
  for (const ReportRow& row : rows) groups[row.strategy].push_back(&row);

  std::vector<StrategySummary> out;
  for (const auto& [strategy, members] : groups) {
    StrategySummary s;
    s.strategy = strategy;
    s.runs = static_cast<int>(members.size());
    for (std::size_t col = 0; col < kMetricColumns.size(); ++col) {
      double sum = 0;
      for (const ReportRow* row : members) sum += metric_value(row->metrics, col);
      double mean = sum / s.runs;
      s.mean[col] = mean;
      if (s.runs > 1) {
        double acc = 0;
        for (const ReportRow* row : members) {
          double d = metric_value(row->metrics, col) - mean;
          acc += d * d;
        }
        s.stddev[col] = std::sqrt(acc / (s.runs - 1));
      }
    }
    out.push_back(std::move(s));
  }
  return out;  // std::map iteration keeps strategies alphabetical
}

std::string format_summary(std::span<const StrategySummary> summaries) {
  std::ostringstream out;
  char buf[128];
  for (const StrategySummary& s : summaries) {
    out << "strategy: " << s.strategy << " (runs: " << s.runs << ")\n";
    for (std::size_t col = 0; col < kMetricColumns.size(); ++col) {
      std::snprintf(buf, sizeof buf, "  %-24s mean %14.6f  sd %14.6f\n", kMetricColumns[col],
                    s.mean[col], s.stddev[col]);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace roadcast::io
