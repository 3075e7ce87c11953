#pragma once

// File formats: spectrum CSV, fit reports, trajectories, metadata sidecars
// and a small SVG line plot. All writes go through write_file_durable.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ndepr/error.hpp"
#include "ndepr/fitting.hpp"
#include "ndepr/lindblad.hpp"
#include "ndepr/spectra.hpp"

namespace ndepr {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes to `path.tmp`, fsyncs, then renames over `path`. Parent
/// directories are created as needed.
inline void write_file_durable(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  const std::string tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw IoError("cannot open " + tmp + " for writing: " + std::strerror(errno));
  std::size_t done = 0;
  while (done < content.size()) {
    const ssize_t n = ::write(fd, content.data() + done, content.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw IoError("write to " + tmp + " failed: " + why);
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw IoError("fsync of " + tmp + " failed: " + why);
  }
  if (::close(fd) != 0) throw IoError("close of " + tmp + " failed: " + std::strerror(errno));
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read error on " + path.string());
  return os.str();
}

// ---------------------------------------------------------------------------
// Spectrum CSV: header `sweep_value,contrast,stderr`.

inline constexpr const char* kSpectrumHeader = "sweep_value,contrast,stderr";

inline std::string spectrum_to_csv(const Spectrum& s) {
  std::string out = std::string(kSpectrumHeader) + "\n";
  for (const auto& p : s.points) {
    out += format_double(p.x) + "," + format_double(p.contrast) + "," + format_double(p.stderr_) + "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_cell(const std::string& cell, std::size_t row, const char* column, const std::string& source) {
  const std::string t = trim(cell);
  char* end = nullptr;
  // Underflow to a subnormal is fine; overflow shows up as inf.
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw InvalidInput(source + ": row " + std::to_string(row) + ", column '" + column + "': '" + t +
                       "' is not a finite number");
  }
  return v;
}

}  // namespace detail

/// Parses spectrum CSV text. Row numbers in diagnostics are 1-based file
/// lines (the header is row 1).
inline Spectrum spectrum_from_csv(const std::string& text, const std::string& source = "spectrum csv") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(source + ": empty file, expected header '" + kSpectrumHeader + "'");
  const auto header = detail::split_commas(detail::trim(line));
  static const char* const kCols[] = {"sweep_value", "contrast", "stderr"};
  if (header.size() != 3) {
    throw InvalidInput(source + ": row 1: header has " + std::to_string(header.size()) + " columns, expected '" +
                       kSpectrumHeader + "'");
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (detail::trim(header[c]) != kCols[c]) {
      throw InvalidInput(source + ": row 1, column " + std::to_string(c + 1) + ": expected '" + kCols[c] +
                         "', found '" + detail::trim(header[c]) + "'");
    }
  }
  Spectrum s;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != 3) {
      throw InvalidInput(source + ": row " + std::to_string(row) + ": expected 3 fields, found " +
                         std::to_string(cells.size()));
    }
    SpectrumPoint p;
    p.x = detail::parse_cell(cells[0], row, kCols[0], source);
    p.contrast = detail::parse_cell(cells[1], row, kCols[1], source);
    p.stderr_ = detail::parse_cell(cells[2], row, kCols[2], source);
    if (!s.points.empty() && !(p.x > s.points.back().x)) {
      throw InvalidInput(source + ": row " + std::to_string(row) + ", column 'sweep_value': values must be strictly increasing");
    }
    s.points.push_back(p);
  }
  if (s.points.empty()) throw InvalidInput(source + ": no data rows");
  return s;
}

inline Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  return spectrum_from_csv(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Fit outputs.

/// Parameter table, covariance and status as plain text.
inline std::string fit_report_text(const FitResult& fr, const std::string& title) {
  std::ostringstream os;
  os << "# " << title << "\n";
  os << "converged = " << (fr.converged ? "true" : "false") << "\n";
  os << "message = " << fr.message << "\n";
  os << "iterations = " << fr.n_iter << "\n";
  os << "residual_norm = " << format_double(fr.residual_norm) << "\n\n";
  os << "parameter,value,stderr\n";
  for (std::size_t i = 0; i < fr.names.size(); ++i)
    os << fr.names[i] << "," << format_double(fr.values[i]) << "," << format_double(fr.errors[i]) << "\n";
  os << "\ncovariance";
  for (const auto& n : fr.names) os << "," << n;
  os << "\n";
  const std::size_t n = fr.names.size();
  for (std::size_t a = 0; a < n; ++a) {
    os << fr.names[a];
    for (std::size_t b = 0; b < n; ++b)
      os << "," << (fr.covariance.size() == n * n ? format_double(fr.covariance[a * n + b]) : std::string("nan"));
    os << "\n";
  }
  return os.str();
}

/// Residual plot data: `sweep_value,data,model,residual`.
inline std::string fit_residuals_csv(const Spectrum& data, const FitResult& fr) {
  std::string out = "sweep_value,data,model,residual\n";
  for (std::size_t i = 0; i < data.points.size(); ++i) {
    const double r = i < fr.residuals.size() ? fr.residuals[i] : std::nan("");
    const double y = data.points[i].contrast;
    out += format_double(data.points[i].x) + "," + format_double(y) + "," + format_double(y - r) + "," +
           format_double(r) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory CSV: `t,<observable>,...`.

inline std::string trajectory_to_csv(const Trajectory& tr) {
  std::string out = "t";
  for (const auto& n : tr.names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    out += format_double(tr.times[i]);
    for (const auto& v : tr.values) out += "," + format_double(v[i]);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metadata sidecar `<file>.meta.json`.

inline std::filesystem::path sidecar_path(const std::filesystem::path& file) {
  return std::filesystem::path(file.string() + ".meta.json");
}

inline void write_sidecar(const std::filesystem::path& file, const nlohmann::json& meta) {
  write_file_durable(sidecar_path(file), meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// SVG line plot.

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

inline std::string render_svg(const std::vector<PlotSeries>& series, const std::string& x_label,
                              const std::string& y_label, const std::string& title) {
  const double W = 720, H = 450, ml = 80, mr = 20, mt = 40, mb = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
  static const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0, yv = y0 + (y1 - y0) * k / 5.0;
    char bx[32], by[32];
    std::snprintf(bx, sizeof bx, "%.4g", xv);
    std::snprintf(by, sizeof by, "%.3g", yv);
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18 << "\" text-anchor=\"middle\">" << bx << "</text>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << by << "</text>\n";
  }
  os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << esc(x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << (mt + H - mb) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(y_label)
     << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) os << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 + 16 * s << "\" text-anchor=\"end\" fill=\"" << color << "\">"
       << esc(series[s].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ndepr
