#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "overlap_tomo/analytic.hpp"
#include "overlap_tomo/estimator.hpp"
#include "overlap_tomo/montecarlo.hpp"
#include "overlap_tomo/so3.hpp"

namespace overlap_tomo::io {

using json = nlohmann::ordered_json;

/// Shortest form is not needed here: 17 significant digits always round-trip.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Non-finite values become null in JSON.
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------------------
// CSV (RFC 4180: CRLF line ends, quoted fields when needed)
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) { row(header); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(fields[i]);
    }
    out_ << "\r\n";
  }

  static std::string quote(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

 private:
  std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

inline json density_to_json(const PiecewisePolynomialDensity& d) {
  json j;
  if (d.is_point_mass()) {
    j["breakpoints"] = json::array({*d.point_mass_location(), *d.point_mass_location()});
    j["pieces"] = json::array();
    j["point_mass"] = *d.point_mass_location();
    return j;
  }
  j["breakpoints"] = d.breakpoints();
  json pieces = json::array();
  for (const auto& c : d.coefficients()) pieces.push_back({c[0], c[1], c[2]});
  j["pieces"] = pieces;
  json local = json::array();
  for (const auto& p : d.local_pieces()) local.push_back({{"center", p.center}, {"a", {p.a0, p.a1, p.a2}}});
  j["local_pieces"] = local;
  j["point_mass"] = nullptr;
  return j;
}

/// `resolution` evenly spaced (q, density) pairs across the support. A point
/// mass is written as a single row with an infinite density.
inline void write_density_csv(std::ostream& out, const PiecewisePolynomialDensity& d, std::size_t resolution) {
  CsvWriter csv(out, {"q", "density"});
  if (d.is_point_mass()) {
    csv.row({format_double(*d.point_mass_location()), "inf"});
    return;
  }
  if (resolution < 2) throw std::invalid_argument("density CSV needs at least two points");
  const double lo = d.support_min(), hi = d.support_max();
  for (std::size_t i = 0; i < resolution; ++i) {
    const double q = i + 1 == resolution ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
    csv.row({format_double(q), format_double(d(q))});
  }
}

// ---------------------------------------------------------------------------
// Estimates, histograms, grids
// ---------------------------------------------------------------------------

inline json estimate_to_json(const SpectrumEstimate& e, const std::string& method, const LimitEstimate& limits) {
  json j;
  const auto& v = e.spectrum.values();
  j["lambda"] = {v[0], v[1], v[2]};
  j["sigma"] = {number_or_null(e.dlambda1), number_or_null(e.dlambda2), number_or_null(e.dlambda3)};
  j["flags"] = e.flags.names();
  j["method"] = method;
  j["limits"] = {{"q_min", limits.q_min}, {"q_max", limits.q_max}, {"dq_min", limits.dq_min}, {"dq_max", limits.dq_max}};
  return j;
}

inline void write_histogram_csv(std::ostream& out, const Histogram1D& h) {
  CsvWriter csv(out, {"bin_left", "bin_right", "count", "normalized_density"});
  const auto& e = h.edges();
  for (std::size_t i = 0; i < h.bins(); ++i)
    csv.row({format_double(e[i]), format_double(e[i + 1]), std::to_string(h.counts()[i]),
             format_double(h.normalized_density(i))});
}

inline json histogram_to_json(const Histogram1D& h) {
  json j;
  j["edges"] = h.edges();
  j["counts"] = h.counts();
  j["total"] = h.total();
  j["outside"] = h.outside();
  return j;
}

inline void write_histogram2d_csv(std::ostream& out, const Histogram2D& h) {
  CsvWriter csv(out, {"t1_left", "t1_right", "t2_left", "t2_right", "count", "normalized_density"});
  const auto& xe = h.x_edges();
  const auto& ye = h.y_edges();
  for (std::size_t i = 0; i < h.nx(); ++i) {
    for (std::size_t j = 0; j < h.ny(); ++j) {
      const double area = (xe[i + 1] - xe[i]) * (ye[j + 1] - ye[j]);
      csv.row({format_double(xe[i]), format_double(xe[i + 1]), format_double(ye[j]), format_double(ye[j + 1]),
               std::to_string(h.count(i, j)), format_double(h.mass(i, j) / area)});
    }
  }
}

/// Unphysical cells keep empty delta and permutation fields.
inline void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
  CsvWriter csv(out, {"lambda1", "lambda3", "delta_qmin", "attaining_perm"});
  for (const auto& c : cells) {
    csv.row({format_double(c.lambda1), format_double(c.lambda3), c.delta_q_min ? format_double(*c.delta_q_min) : "",
             c.attaining ? to_string(*c.attaining) : ""});
  }
}

inline json maximin_to_json(const MaximinReport& r) {
  return {{"q_min_w", r.q_min_w}, {"q_min", r.q_min},  {"q_wc", r.q_wc},
          {"delta_q_min", r.delta_q_min}, {"q12", r.q12}, {"q23", r.q23},
          {"attaining_perm", to_string(r.attaining)}};
}

// ---------------------------------------------------------------------------
// Files and hashes
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

inline std::string file_hash(const std::filesystem::path& p) { return hex64(fnv1a64(read_file(p))); }

/// Reads the first column of a CSV of overlap samples. A non-numeric first
/// line is taken as a header.
inline std::vector<double> read_samples_csv(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string field = line.substr(0, line.find(','));
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
      out.push_back(v);
    } catch (const std::exception&) {
      if (!first) throw std::invalid_argument("samples file: not a number: '" + field + "'");
    }
    first = false;
  }
  return out;
}

}  // namespace overlap_tomo::io
