#pragma once

// Flat CSV form of a PanelDataset. Column order for horizon T:
//   x0_1..x0_d0, then for j = 0..T: z{j}, w{j}, y{j+1}, x{j+1}_1..x{j+1}_d
// so T = 1 with d0 = d1 = 6, d2 = 0 reads
//   x0_1..x0_6,z0,w0,y1,x1_1..x1_6,z1,w1,y2
// Reals use the shortest representation that parses back exactly.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "latre/errors.hpp"
#include "latre/model.hpp"
#include "latre/simgen.hpp"

namespace latre::csv {

inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> header_for(const PanelDataset& d) {
  std::vector<std::string> h;
  const std::size_t T = d.horizon();
  for (std::size_t k = 1; k <= d.dim(0); ++k) h.push_back("x0_" + std::to_string(k));
  for (std::size_t j = 0; j <= T; ++j) {
    h.push_back("z" + std::to_string(j));
    h.push_back("w" + std::to_string(j));
    h.push_back("y" + std::to_string(j + 1));
    for (std::size_t k = 1; k <= d.dim(j + 1); ++k)
      h.push_back("x" + std::to_string(j + 1) + "_" + std::to_string(k));
  }
  return h;
}

inline void write_dataset(std::ostream& os, const PanelDataset& d) {
  const auto header = header_for(d);
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  std::string line;
  for (std::size_t i = 0; i < d.size(); ++i) {
    line.clear();
    auto put = [&](const std::string& s) {
      if (!line.empty()) line += ',';
      line += s;
    };
    for (double v : d.x(i, 0)) put(format_real(v));
    for (std::size_t j = 0; j <= d.horizon(); ++j) {
      put(std::to_string(d.z(i, j)));
      put(std::to_string(d.w(i, j)));
      put(format_real(d.y(i, j + 1)));
      for (double v : d.x(i, j + 1)) put(format_real(v));
    }
    line += '\n';
    os << line;
  }
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(',', start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
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

inline bool parse_real(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

inline bool parse_int(std::string_view s, int& out) {
  s = trim(s);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

// Column layout recovered from a header line.
struct Layout {
  std::size_t horizon = 0;
  std::vector<std::size_t> dims;
};

inline Layout parse_header(const std::vector<std::string_view>& cols) {
  Layout lay;
  std::size_t c = 0;
  auto covariates = [&](std::size_t j) {
    std::size_t k = 0;
    const std::string prefix = "x" + std::to_string(j) + "_";
    while (c < cols.size() && trim(cols[c]) == prefix + std::to_string(k + 1)) {
      ++k;
      ++c;
    }
    return k;
  };
  lay.dims.push_back(covariates(0));
  std::size_t j = 0;
  while (c < cols.size()) {
    for (const std::string& name : {"z" + std::to_string(j), "w" + std::to_string(j), "y" + std::to_string(j + 1)}) {
      if (c >= cols.size() || trim(cols[c]) != name) {
        throw InputError("header: expected column '" + name + "' at position " + std::to_string(c + 1));
      }
      ++c;
    }
    lay.dims.push_back(covariates(j + 1));
    ++j;
  }
  if (j == 0) throw InputError("header: no treatment periods found");
  lay.horizon = j - 1;
  return lay;
}

}  // namespace detail

inline PanelDataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("csv: missing header line");
  const auto layout = detail::parse_header(detail::split(line));
  const std::size_t T = layout.horizon;
  std::size_t width = 0;
  for (std::size_t dj : layout.dims) width += dj;
  width += 3 * (T + 1);

  std::vector<std::string> rows;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw InputError("csv: no data rows");
  PanelDataset d(T, layout.dims, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t row_no = i + 2;  // 1-based file line number
    const auto cells = detail::split(rows[i]);
    if (cells.size() != width) {
      throw InputError("csv row " + std::to_string(row_no) + ": expected " + std::to_string(width) +
                       " fields, found " + std::to_string(cells.size()));
    }
    std::size_t c = 0;
    auto real = [&](double& v) {
      if (!detail::parse_real(cells[c], v)) {
        throw InputError("csv row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                         ": not a number: '" + std::string(cells[c]) + "'");
      }
      ++c;
    };
    auto integer = [&]() {
      int v = 0;
      if (!detail::parse_int(cells[c], v)) {
        throw InputError("csv row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                         ": not an integer: '" + std::string(cells[c]) + "'");
      }
      ++c;
      return v;
    };
    for (auto& v : d.x_mut(i, 0)) real(v);
    for (std::size_t j = 0; j <= T; ++j) {
      d.set_z(i, j, integer());
      d.set_w(i, j, integer());
      double y = 0.0;
      real(y);
      d.set_y(i, j + 1, y);
      for (auto& v : d.x_mut(i, j + 1)) real(v);
    }
  }
  return d;
}

inline PanelDataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path + "'");
  return read_dataset(in);
}

inline void write_latents(std::ostream& os, const std::vector<LatentRecord>& latents) {
  os << "eps0,eps1,w0_0,w0_1,w1_0,w1_1\n";
  for (const auto& l : latents) {
    os << format_real(l.eps0) << ',' << format_real(l.eps1) << ',' << l.w0_0 << ',' << l.w0_1 << ','
       << l.w1_0 << ',' << l.w1_1 << '\n';
  }
}

inline std::vector<LatentRecord> read_latents(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != "eps0,eps1,w0_0,w0_1,w1_0,w1_1") {
    throw InputError("latents: unexpected header");
  }
  std::vector<LatentRecord> out;
  std::size_t row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line);
    LatentRecord l;
    if (cells.size() != 6 || !detail::parse_real(cells[0], l.eps0) || !detail::parse_real(cells[1], l.eps1) ||
        !detail::parse_int(cells[2], l.w0_0) || !detail::parse_int(cells[3], l.w0_1) ||
        !detail::parse_int(cells[4], l.w1_0) || !detail::parse_int(cells[5], l.w1_1)) {
      throw InputError("latents row " + std::to_string(row_no) + ": malformed");
    }
    out.push_back(l);
  }
  return out;
}

}  // namespace latre::csv
