#pragma once

// Trace CSV emission and parsing. Doubles are written with 17 significant
// digits so a written trace re-parses to the identical in-memory trace.
// Absent optional fields are empty cells.

#include "agda/core.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace agda {

inline constexpr const char* kTraceHeader = "iter,grad_evals,a,b,potential,grad_x_norm,grad_y_norm,dist_to_saddle_sq";

[[nodiscard]] inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline double parse_double_cell(const std::string& cell, std::size_t line) {
  // strtod accepts inf/nan, which the writer emits for diverged iterates.
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size())
    throw std::runtime_error("trace CSV line " + std::to_string(line) + ": bad number '" + cell + "'");
  return v;
}

inline std::uint64_t parse_count_cell(const std::string& cell, std::size_t line) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw std::runtime_error("trace CSV line " + std::to_string(line) + ": bad count '" + cell + "'");
  return v;
}

inline std::optional<double> parse_optional_cell(const std::string& cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  return parse_double_cell(cell, line);
}

}  // namespace detail

inline void write_trace_row(std::ostream& os, const TraceRecord& r) {
  os << r.iter << ',' << r.grad_evals << ',' << detail::format_optional(r.a) << ',' << detail::format_optional(r.b)
     << ',' << detail::format_optional(r.potential) << ',' << format_double(r.grad_x_norm) << ','
     << format_double(r.grad_y_norm) << ',' << detail::format_optional(r.dist_to_saddle_sq) << '\n';
}

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace) write_trace_row(os, r);
}

inline void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trace_csv(os, trace);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

[[nodiscard]] inline Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw std::runtime_error("trace CSV: missing or wrong header");
  Trace trace;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8)
      throw std::runtime_error("trace CSV line " + std::to_string(lineno) + ": expected 8 fields");
    TraceRecord r;
    r.iter = detail::parse_count_cell(cells[0], lineno);
    r.grad_evals = detail::parse_count_cell(cells[1], lineno);
    r.a = detail::parse_optional_cell(cells[2], lineno);
    r.b = detail::parse_optional_cell(cells[3], lineno);
    r.potential = detail::parse_optional_cell(cells[4], lineno);
    r.grad_x_norm = detail::parse_double_cell(cells[5], lineno);
    r.grad_y_norm = detail::parse_double_cell(cells[6], lineno);
    r.dist_to_saddle_sq = detail::parse_optional_cell(cells[7], lineno);
    trace.push_back(r);
  }
  return trace;
}

[[nodiscard]] inline Trace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_trace_csv(is);
}

}  // namespace agda
