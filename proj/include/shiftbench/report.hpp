#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "shiftbench/errors.hpp"
#include "shiftbench/jsonio.hpp"
#include "shiftbench/metrics.hpp"

namespace shiftbench {

// ---- CSV -------------------------------------------------------------------

inline std::string matrix_to_csv(const AggregateMatrix& matrix,
                                 const std::string& config_digest = "") {
  std::string out;
  if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
  out += "method";
  for (const auto& s : matrix.settings) out += ',' + s.label();
  out += '\n';
  for (size_t mi = 0; mi < matrix.methods.size(); ++mi) {
    out += matrix.methods[mi];
    for (size_t si = 0; si < matrix.settings.size(); ++si) {
      double v = matrix.cells[mi][si];
      out += ',';
      out += std::isnan(v) ? "nan" : format_float9(v);
    }
    out += '\n';
  }
  return out;
}

inline AggregateMatrix matrix_from_csv(const std::string& text) {
  AggregateMatrix matrix;
  size_t pos = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    std::string line =
        text.substr(pos, (eol == std::string::npos ? text.size() : eol) - pos);
    pos = (eol == std::string::npos) ? text.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!saw_header) {
      if (fields.empty() || fields[0] != "method")
        throw ParseError("bad matrix CSV header");
      for (size_t i = 1; i < fields.size(); ++i) {
        size_t colon = fields[i].rfind(':');
        if (colon == std::string::npos)
          throw ParseError("bad setting label: " + fields[i]);
        Setting s;
        s.shift_id = fields[i].substr(0, colon);
        s.n = std::stoull(fields[i].substr(colon + 1));
        matrix.settings.push_back(std::move(s));
      }
      saw_header = true;
      continue;
    }
    if (fields.size() != matrix.settings.size() + 1)
      throw ParseError("bad matrix CSV row: " + line);
    matrix.methods.push_back(fields[0]);
    std::vector<double> row;
    for (size_t i = 1; i < fields.size(); ++i)
      row.push_back(fields[i] == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                       : std::stod(fields[i]));
    matrix.cells.push_back(std::move(row));
  }
  if (!saw_header) throw ParseError("matrix CSV has no header");
  return matrix;
}

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows,
                                  const std::string& config_digest = "") {
  std::string out;
  if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
  out += "method,shift,n,mean_test_top1,std_test_top1,seeds\n";
  for (const auto& r : rows) {
    out += r.method + ',' + r.shift_id + ',' + std::to_string(r.n) + ',' +
           format_float9(r.mean) + ',' + format_float9(r.stddev) + ',' +
           std::to_string(r.count) + '\n';
  }
  return out;
}

inline std::string ranks_to_csv(const RankResult& ranks,
                                const std::string& config_digest = "") {
  std::string out;
  if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
  out += "method,median_rank\n";
  for (size_t mi = 0; mi < ranks.methods.size(); ++mi)
    out += ranks.methods[mi] + ',' + format_float9(ranks.median_rank[mi]) + '\n';
  return out;
}

// ---- JSON ------------------------------------------------------------------

inline std::string matrix_to_json(const AggregateMatrix& matrix,
                                  const std::string& config_digest = "") {
  std::string out = "{\"config_digest\":\"" + json_escape(config_digest) + "\"";
  out += ",\"settings\":[";
  for (size_t i = 0; i < matrix.settings.size(); ++i) {
    if (i) out += ',';
    out += '"' + json_escape(matrix.settings[i].label()) + '"';
  }
  out += "],\"methods\":[";
  for (size_t i = 0; i < matrix.methods.size(); ++i) {
    if (i) out += ',';
    out += '"' + json_escape(matrix.methods[i]) + '"';
  }
  out += "],\"cells\":[";
  for (size_t mi = 0; mi < matrix.methods.size(); ++mi) {
    if (mi) out += ',';
    out += '[';
    for (size_t si = 0; si < matrix.settings.size(); ++si) {
      if (si) out += ',';
      double v = matrix.cells[mi][si];
      out += std::isnan(v) ? "null" : format_float9(v);
    }
    out += ']';
  }
  out += "]}";
  return out;
}

inline std::string ranks_to_json(const RankResult& ranks,
                                 const std::string& config_digest = "") {
  std::string out = "{\"config_digest\":\"" + json_escape(config_digest) + "\"";
  out += ",\"methods\":[";
  for (size_t i = 0; i < ranks.methods.size(); ++i) {
    if (i) out += ',';
    out += '"' + json_escape(ranks.methods[i]) + '"';
  }
  out += "],\"median_rank\":[";
  for (size_t i = 0; i < ranks.median_rank.size(); ++i) {
    if (i) out += ',';
    out += format_float9(ranks.median_rank[i]);
  }
  out += "],\"groups\":[";
  for (size_t g = 0; g < ranks.groups.size(); ++g) {
    if (g) out += ',';
    const auto& grp = ranks.groups[g];
    out += "{\"setting\":\"" + json_escape(grp.setting.label()) + "\"";
    out += ",\"seed\":" + std::to_string(grp.seed) + ",\"ranks\":[";
    for (size_t i = 0; i < grp.ranks.size(); ++i) {
      if (i) out += ',';
      out += format_float9(grp.ranks[i]);
    }
    out += "]}";
  }
  out += "]}";
  return out;
}

// Writes one aggregate matrix in the requested format (csv, json, or an SVG
// heatmap). Paths are created by the caller; write failures raise IoError.
inline void emit_report(const AggregateMatrix& matrix, const std::string& format,
                        const std::string& path, const std::string& title = "",
                        const std::string& config_digest = "");

// ---- SVG heatmap -------------------------------------------------------------

// Diverging map: negative red, positive blue, white at zero, saturation at
// the matrix absolute maximum.
inline std::array<int, 3> heatmap_color(double value, double max_abs) {
  if (std::isnan(value)) return {200, 200, 200};
  double t = max_abs > 0.0 ? std::clamp(value / max_abs, -1.0, 1.0) : 0.0;
  auto channel = [](double f) {
    return static_cast<int>(std::lround(255.0 * f));
  };
  if (t < 0.0) return {255, channel(1.0 + t), channel(1.0 + t)};
  return {channel(1.0 - t), channel(1.0 - t), 255};
}

inline std::string matrix_to_svg(const AggregateMatrix& matrix,
                                 const std::string& title,
                                 const std::string& config_digest = "") {
  constexpr int kCellW = 72, kCellH = 26, kLeft = 150, kTop = 70;
  auto rows = static_cast<int>(matrix.methods.size());
  auto cols = static_cast<int>(matrix.settings.size());
  int width = kLeft + cols * kCellW + 10;
  int height = kTop + rows * kCellH + 10;

  double max_abs = 0.0;
  for (const auto& row : matrix.cells)
    for (double v : row)
      if (!std::isnan(v)) max_abs = std::max(max_abs, std::abs(v));

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\">\n";
  if (!config_digest.empty())
    svg += "<!-- config_digest=" + config_digest + " -->\n";
  svg += "<text x=\"10\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" "
         "font-weight=\"bold\">" + json_escape(title) + "</text>\n";

  for (int c = 0; c < cols; ++c) {
    svg += "<text x=\"" + std::to_string(kLeft + c * kCellW + kCellW / 2) +
           "\" y=\"" + std::to_string(kTop - 10) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
           json_escape(matrix.settings[static_cast<size_t>(c)].label()) +
           "</text>\n";
  }
  for (int r = 0; r < rows; ++r) {
    svg += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" +
           std::to_string(kTop + r * kCellH + kCellH / 2 + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" +
           json_escape(matrix.methods[static_cast<size_t>(r)]) + "</text>\n";
    for (int c = 0; c < cols; ++c) {
      double v = matrix.cells[static_cast<size_t>(r)][static_cast<size_t>(c)];
      auto [cr, cg, cb] = heatmap_color(v, max_abs);
      svg += "<rect x=\"" + std::to_string(kLeft + c * kCellW) + "\" y=\"" +
             std::to_string(kTop + r * kCellH) + "\" width=\"" +
             std::to_string(kCellW) + "\" height=\"" + std::to_string(kCellH) +
             "\" fill=\"rgb(" + std::to_string(cr) + ',' + std::to_string(cg) +
             ',' + std::to_string(cb) + ")\" stroke=\"#888\"/>\n";
      char label[32];
      if (std::isnan(v)) {
        std::snprintf(label, sizeof(label), "n/a");
      } else {
        std::snprintf(label, sizeof(label), "%.1f", v);
      }
      bool dark = max_abs > 0.0 && std::abs(v) / max_abs > 0.6;
      svg += "<text x=\"" + std::to_string(kLeft + c * kCellW + kCellW / 2) +
             "\" y=\"" + std::to_string(kTop + r * kCellH + kCellH / 2 + 4) +
             "\" font-family=\"sans-serif\" font-size=\"11\" "
             "text-anchor=\"middle\" fill=\"" +
             (dark ? "#ffffff" : "#000000") + "\">" + label + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline void emit_report(const AggregateMatrix& matrix, const std::string& format,
                        const std::string& path, const std::string& title,
                        const std::string& config_digest) {
  if (format == "csv") {
    write_file(path, matrix_to_csv(matrix, config_digest));
  } else if (format == "json") {
    write_file(path, matrix_to_json(matrix, config_digest) + "\n");
  } else if (format == "svg") {
    write_file(path, matrix_to_svg(matrix, title, config_digest));
  } else {
    throw FormatError("unknown report format: " + format);
  }
}

}  // namespace shiftbench
