#pragma once

// Readers and writers for the on-disk formats:
//   canonical cycle CSV   cycle_id,soh,v_0,...,v_{d-1}
//   raw trace CSV         cycle_id,time_s,voltage_V
//   capacity CSV          cycle_id,discharge_capacity_Ah
// Floats are written as shortest round-trip decimals.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "citl/data.hpp"

namespace citl::csv {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error(ErrorCode::Io, "float formatting failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

inline int parse_int(std::string_view s, std::size_t line_no) {
  const double v = parse_double(s, line_no);
  if (v != std::floor(v) || v < 0) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad cycle id");
  }
  return static_cast<int>(v);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

inline std::string trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return std::string(s);
}

}  // namespace detail

inline CycleMatrix read_cycles(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw Error(ErrorCode::Parse, path + ": missing header");
  const auto header = split_fields(lines.front());
  if (header.size() < 3 || detail::trim(header[0]) != "cycle_id" || detail::trim(header[1]) != "soh") {
    throw Error(ErrorCode::Parse, path + ": header must start with cycle_id,soh,v_0");
  }
  const std::size_t d = header.size() - 2;
  CycleMatrix out;
  out.x = Matrix(0, d);
  Vector row(d);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li]);
    if (fields.size() != d + 2) {
      throw Error(ErrorCode::Parse, path + ": line " + std::to_string(li + 1) + " has wrong field count");
    }
    out.cycle_ids.push_back(parse_int(fields[0], li + 1));
    out.soh.push_back(parse_double(fields[1], li + 1));
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(fields[j + 2], li + 1);
    out.x.append_row(row);
  }
  if (out.size() == 0) throw Error(ErrorCode::EmptyData, path + ": no cycles");
  for (std::size_t i = 1; i < out.cycle_ids.size(); ++i) {
    if (out.cycle_ids[i] <= out.cycle_ids[i - 1]) {
      throw Error(ErrorCode::Parse, path + ": cycle ids must be strictly increasing");
    }
  }
  return out;
}

inline void write_cycles(const std::string& path, const CycleMatrix& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "cycle_id,soh";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",v_" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.cycle_ids[i] << ',' << format_double(data.soh[i]);
    for (double v : data.x.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

/// Reads the raw trace CSV plus its companion capacity CSV.
inline std::vector<RawCycleTrace> read_raw_traces(const std::string& trace_path,
                                                  const std::string& capacity_path) {
  std::map<int, RawCycleTrace> by_id;
  const auto lines = detail::read_lines(trace_path);
  if (lines.empty() || detail::trim(lines.front()) != "cycle_id,time_s,voltage_V") {
    throw Error(ErrorCode::Parse, trace_path + ": header must be cycle_id,time_s,voltage_V");
  }
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_fields(lines[li]);
    if (f.size() != 3) throw Error(ErrorCode::Parse, trace_path + ": line " + std::to_string(li + 1));
    const int id = parse_int(f[0], li + 1);
    auto& t = by_id[id];
    t.cycle_id = id;
    t.time_s.push_back(parse_double(f[1], li + 1));
    t.voltage_v.push_back(parse_double(f[2], li + 1));
  }
  const auto cap_lines = detail::read_lines(capacity_path);
  if (cap_lines.empty() || detail::trim(cap_lines.front()) != "cycle_id,discharge_capacity_Ah") {
    throw Error(ErrorCode::Parse, capacity_path + ": header must be cycle_id,discharge_capacity_Ah");
  }
  for (std::size_t li = 1; li < cap_lines.size(); ++li) {
    const auto f = split_fields(cap_lines[li]);
    if (f.size() != 2) throw Error(ErrorCode::Parse, capacity_path + ": line " + std::to_string(li + 1));
    const int id = parse_int(f[0], li + 1);
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::Parse, capacity_path + ": capacity for unknown cycle " + std::to_string(id));
    }
    it->second.discharge_capacity_ah = parse_double(f[1], li + 1);
  }
  std::vector<RawCycleTrace> out;
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return out;
}

inline void write_predictions(const std::string& path, const std::vector<int>& cycle_ids, const Matrix& yhat) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "cycle_id";
  for (std::size_t q = 0; q < yhat.cols(); ++q) out << (yhat.cols() == 1 ? ",soh_pred" : ",soh_pred_" + std::to_string(q));
  out << '\n';
  for (std::size_t i = 0; i < yhat.rows(); ++i) {
    out << cycle_ids[i];
    for (double v : yhat.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace citl::csv
