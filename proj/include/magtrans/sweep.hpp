#pragma once

/// \file
/// Field-sweep records and the CSV format shared by the generator and the
/// analysis pipeline.
///
/// One row per field point:
///
///     sample_id,T_bath_K,theta_deg,B_T,R_xx_ohm,R_xy_ohm,I_A
///
/// Rows of one sweep share (sample_id, T_bath_K, theta_deg). R_xy may be
/// left empty for sweeps without a Hall signal.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "magtrans/physcore.hpp"

namespace magtrans {

struct SweepRecord {
  std::string sample_id;
  double T_bath = 0.0;     // K
  double theta_deg = 0.0;  // 0 = field perpendicular to the layer
  std::vector<double> B;     // T
  std::vector<double> R_xx;  // Ohm
  std::vector<double> R_xy;  // Ohm, NaN where not measured
  double current = 0.0;      // A, metadata only

  std::size_t size() const { return B.size(); }
  bool has_hall() const {
    return !R_xy.empty() && std::all_of(R_xy.begin(), R_xy.end(), [](double v) { return std::isfinite(v); });
  }
};

inline constexpr std::string_view kSweepHeader = "sample_id,T_bath_K,theta_deg,B_T,R_xx_ohm,R_xy_ohm,I_A";
inline constexpr std::string_view kPlotMarker = "# magtrans plot data";

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Shortest form that reads back to the same double.
inline std::string format_exact(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

/// Sample ids name output directories, so they must be a single plain path
/// component.
inline bool valid_sample_id(std::string_view id) {
  return !id.empty() && id != "." && id != ".." && id.find_first_of(",/\\\n\r") == std::string_view::npos;
}

/// Parse sweep rows from a stream. `source` names the input in messages.
/// Sweeps whose field column is not monotone are sorted by B and a warning
/// is appended to `warnings` (when given).
inline std::vector<SweepRecord> parse_sweep_csv(std::istream& in, const std::string& source = "<stream>",
                                                std::vector<std::string>* warnings = nullptr) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty())
    throw InputError(source + ": empty file (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (detail::trim(line).starts_with(kPlotMarker))
    throw InputError(source + ": this is a plot-data file, not a sweep file");

  const auto cols = detail::split_commas(detail::trim(line));
  const auto expected = detail::split_commas(kSweepHeader);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= cols.size()) throw InputError(source + ": header is missing column '" + std::string(expected[i]) + "'");
    if (detail::trim(cols[i]) != expected[i])
      throw InputError(source + ": bad header column " + std::to_string(i + 1) + " '" + std::string(cols[i]) +
                       "', expected '" + std::string(expected[i]) + "'");
  }
  if (cols.size() > expected.size())
    throw InputError(source + ": unexpected extra header column '" + std::string(cols[expected.size()]) + "'");

  std::vector<SweepRecord> sweeps;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    const auto where = source + ": row " + std::to_string(row);
    if (cells.size() != expected.size())
      throw InputError(where + ": expected " + std::to_string(expected.size()) + " cells, found " +
                       std::to_string(cells.size()));
    double v[6];
    for (std::size_t c = 1; c < expected.size(); ++c) {
      if (c == 5 && detail::trim(cells[c]).empty()) {
        v[c - 1] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (!detail::parse_double(cells[c], v[c - 1]))
        throw InputError(where + ": non-numeric " + std::string(expected[c]) + " '" + std::string(cells[c]) + "'");
    }
    const std::string id(detail::trim(cells[0]));
    if (id.empty()) throw InputError(where + ": empty sample_id");
    if (!valid_sample_id(id)) throw InputError(where + ": sample_id '" + id + "' is not usable as a directory name");
    if (!(v[0] > 0.0)) throw InputError(where + ": T_bath_K must be positive");

    auto it = std::find_if(sweeps.begin(), sweeps.end(), [&](const SweepRecord& s) {
      return s.sample_id == id && s.T_bath == v[0] && s.theta_deg == v[1];
    });
    if (it == sweeps.end()) {
      sweeps.push_back({id, v[0], v[1], {}, {}, {}, v[5]});
      it = std::prev(sweeps.end());
    }
    it->B.push_back(v[2]);
    it->R_xx.push_back(v[3]);
    it->R_xy.push_back(v[4]);
  }
  if (sweeps.empty()) throw InputError(source + ": no data rows");

  for (auto& s : sweeps) {
    const bool up = std::adjacent_find(s.B.begin(), s.B.end(), std::greater_equal<>()) == s.B.end();
    const bool down = std::adjacent_find(s.B.begin(), s.B.end(), std::less_equal<>()) == s.B.end();
    if (up || down) continue;
    std::vector<std::size_t> idx(s.B.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.B[a] < s.B[b]; });
    auto permute = [&](std::vector<double>& col) {
      std::vector<double> tmp(col.size());
      for (std::size_t k = 0; k < idx.size(); ++k) tmp[k] = col[idx[k]];
      col = std::move(tmp);
    };
    permute(s.B);
    permute(s.R_xx);
    permute(s.R_xy);
    if (warnings) {
      std::ostringstream msg;
      msg << source << ": sweep " << s.sample_id << " T=" << s.T_bath << " K theta=" << s.theta_deg
          << " deg is not monotone in B; re-sorted";
      warnings->push_back(msg.str());
    }
  }
  return sweeps;
}

inline std::vector<SweepRecord> parse_sweep_csv(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return parse_sweep_csv(in, path, warnings);
}

/// Write sweeps in the ingestion format. Values are written in the shortest
/// form that reads back exactly, so parse and re-emit reproduce the bytes.
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& sweeps) {
  out << kSweepHeader << '\n';
  for (const auto& s : sweeps) {
    if (s.R_xx.size() != s.B.size() || s.R_xy.size() != s.B.size())
      throw InputError("write_sweep_csv: column lengths differ in sweep " + s.sample_id);
    const std::string prefix = s.sample_id + ',' + detail::format_exact(s.T_bath) + ',' +
                               detail::format_exact(s.theta_deg) + ',';
    const std::string current = detail::format_exact(s.current);
    for (std::size_t i = 0; i < s.B.size(); ++i) {
      out << prefix << detail::format_exact(s.B[i]) << ',' << detail::format_exact(s.R_xx[i]) << ',';
      if (std::isfinite(s.R_xy[i])) out << detail::format_exact(s.R_xy[i]);
      out << ',' << current << '\n';
    }
  }
}

/// 64-bit FNV-1a, hex encoded; used to fingerprint inputs in reports.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace magtrans
