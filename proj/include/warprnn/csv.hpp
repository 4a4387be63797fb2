#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "warprnn/common.hpp"

namespace warprnn {

struct MetricsRecord {
  std::int64_t iteration = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;  // -1 where accuracy is undefined
  double lr = 0.0;
  double wall_time_s = 0.0;    // excluded from determinism guarantees
};

struct MetricsLog {
  std::vector<MetricsRecord> records;
  bool aborted = false;
  std::string error;  // diagnostic when aborted
};

namespace detail {
inline std::string real17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline const char* metrics_csv_header() {
  return "iteration,train_loss,eval_loss,eval_accuracy,lr,wall_time_s";
}

// Reals at 17 significant digits so parsing the file reproduces the log
// exactly; an aborted run appends a trailing comment with the diagnostic.
inline void emit_csv(const MetricsLog& log, std::ostream& os) {
  os << metrics_csv_header() << '\n';
  for (const MetricsRecord& r : log.records) {
    os << r.iteration << ',' << detail::real17(r.train_loss) << ','
       << detail::real17(r.eval_loss) << ',' << detail::real17(r.eval_accuracy)
       << ',' << detail::real17(r.lr) << ',' << detail::real17(r.wall_time_s)
       << '\n';
  }
  if (log.aborted) os << "# error: " << log.error << '\n';
}

inline void emit_csv_file(const MetricsLog& log, const std::string& path) {
  std::ofstream os(path);
  check_config(os.good(), "emit_csv: cannot open '" + path + "' for writing");
  emit_csv(log, os);
  os.flush();
  check_config(os.good(), "emit_csv: write to '" + path + "' failed");
}

inline MetricsLog parse_csv(std::istream& is) {
  MetricsLog log;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string tag = "# error: ";
      if (line.rfind(tag, 0) == 0) {
        log.aborted = true;
        log.error = line.substr(tag.size());
      }
      continue;
    }
    if (first) {  // header
      check_config(line == metrics_csv_header(),
                   "parse_csv: unexpected header '" + line + "'");
      first = false;
      continue;
    }
    MetricsRecord r;
    char c[5];
    std::istringstream ss(line);
    ss >> r.iteration >> c[0] >> r.train_loss >> c[1] >> r.eval_loss >> c[2] >>
        r.eval_accuracy >> c[3] >> r.lr >> c[4] >> r.wall_time_s;
    check_config(!ss.fail() && c[0] == ',' && c[1] == ',' && c[2] == ',' &&
                     c[3] == ',' && c[4] == ',',
                 "parse_csv: malformed row '" + line + "'");
    log.records.push_back(r);
  }
  check_config(!first, "parse_csv: missing header");
  return log;
}

inline MetricsLog parse_csv_file(const std::string& path) {
  std::ifstream is(path);
  check_config(is.good(), "parse_csv: cannot open '" + path + "'");
  return parse_csv(is);
}

// ---- multi-run aggregation ------------------------------------------------------

struct SummaryRow {
  std::int64_t iteration = 0;
  std::string metric;
  double mean = 0.0, min = 0.0, max = 0.0;
};

struct MultiRunSummary {
  std::vector<SummaryRow> rows;
  std::vector<std::uint64_t> failed_seeds;
  std::vector<MetricsLog> logs;  // per run, in seed order
};

inline void emit_summary_csv(const MultiRunSummary& s, std::ostream& os) {
  os << "iteration,metric,mean,min,max\n";
  for (const SummaryRow& r : s.rows) {
    os << r.iteration << ',' << r.metric << ',' << detail::real17(r.mean) << ','
       << detail::real17(r.min) << ',' << detail::real17(r.max) << '\n';
  }
  if (!s.failed_seeds.empty()) {
    os << "# failed_seeds:";
    for (std::uint64_t seed : s.failed_seeds) os << ' ' << seed;
    os << '\n';
  }
}

inline void emit_summary_csv_file(const MultiRunSummary& s,
                                  const std::string& path) {
  std::ofstream os(path);
  check_config(os.good(),
               "emit_summary_csv: cannot open '" + path + "' for writing");
  emit_summary_csv(s, os);
}

}  // namespace warprnn
