#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dppmc/common.hpp"

namespace dppmc {

// One optimizer iteration as it appears in a run CSV.
struct RunRecord {
  long iteration = 0;
  long cumulative_evals = 0;
  double objective = 0.0;
  std::uint64_t seed = 0;
  std::string method;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_run_records(std::ostream& out,
                              const std::vector<RunRecord>& rows,
                              const std::string& header_comment = "") {
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "iteration,cumulative_evals,objective,seed,method\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.cumulative_evals << ','
        << detail::format_double(r.objective) << ',' << r.seed << ','
        << r.method << "\n";
  }
}

inline void save_run_records(const std::string& path,
                             const std::vector<RunRecord>& rows,
                             const std::string& header_comment = "") {
  std::ofstream out(path);
  if (!out) throw Error("save_run_records: cannot open " + path);
  write_run_records(out, rows, header_comment);
}

inline std::vector<RunRecord> load_run_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_run_records: cannot open " + path);
  std::vector<RunRecord> rows;
  std::string line;
  bool saw_header = false;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;  // column header
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5)
      throw Error("load_run_records: line " + std::to_string(line_no) +
                  ": expected 5 fields, got " + std::to_string(fields.size()));
    try {
      RunRecord r;
      r.iteration = std::stol(fields[0]);
      r.cumulative_evals = std::stol(fields[1]);
      r.objective = std::stod(fields[2]);
      r.seed = std::stoull(fields[3]);
      r.method = fields[4];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw Error("load_run_records: line " + std::to_string(line_no) +
                  ": malformed record");
    }
  }
  return rows;
}

}  // namespace dppmc
