#pragma once

// Sparsity renderings of a single spectral element.

#include "slsmeso/common.hpp"
#include "slsmeso/io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace slsmeso::render {

/// One line per row: '#' where |v| > tol, '.' elsewhere. Columns are
/// labelled 1..cols; `row_labels` overrides the row numbers when given.
inline std::string sparsity_text(const Matrix& v, double tol, const std::string& title,
                                 const std::vector<Index>& row_labels = {}) {
  std::string out = title + "\n     ";
  for (Index c = 0; c < v.cols(); ++c) out += std::to_string((c + 1) % 10);
  out += '\n';
  for (Index r = 0; r < v.rows(); ++r) {
    const Index label = row_labels.empty() ? r + 1 : row_labels[static_cast<std::size_t>(r)] + 1;
    std::string head = std::to_string(label);
    head.resize(4, ' ');
    out += head + ' ';
    for (Index c = 0; c < v.cols(); ++c) out += std::abs(v(r, c)) > tol ? '#' : '.';
    out += '\n';
  }
  return out;
}

/// Heatmap with log-scaled shading of |v|; cells at or below tol are white.
inline std::string sparsity_svg(const Matrix& v, double tol, const std::string& title,
                                const std::vector<Index>& row_labels = {}) {
  constexpr int cell = 24;
  constexpr int margin = 32;
  const int width = margin + static_cast<int>(v.cols()) * cell + 8;
  const int height = margin + static_cast<int>(v.rows()) * cell + 8;
  double vmax = 0.0;
  for (Index i = 0; i < v.size(); ++i) vmax = std::max(vmax, std::abs(v.data()[i]));
  const double lo = std::log10(std::max(tol, 1e-300));
  const double hi = vmax > tol ? std::log10(vmax) : lo + 1.0;

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                  std::to_string(height) + "\" font-family=\"monospace\" font-size=\"11\">\n";
  s += "<title>" + title + "</title>\n";
  s += "<text x=\"4\" y=\"12\">" + title + "</text>\n";
  for (Index c = 0; c < v.cols(); ++c)
    s += "<text x=\"" + std::to_string(margin + static_cast<int>(c) * cell + 8) + "\" y=\"28\">" +
         std::to_string(c + 1) + "</text>\n";
  for (Index r = 0; r < v.rows(); ++r) {
    const Index label = row_labels.empty() ? r + 1 : row_labels[static_cast<std::size_t>(r)] + 1;
    const int y = margin + static_cast<int>(r) * cell;
    s += "<text x=\"4\" y=\"" + std::to_string(y + 16) + "\">" + std::to_string(label) + "</text>\n";
    for (Index c = 0; c < v.cols(); ++c) {
      const double a = std::abs(v(r, c));
      int shade = 255;
      if (a > tol) {
        const double f = hi > lo ? std::clamp((std::log10(a) - lo) / (hi - lo), 0.0, 1.0) : 1.0;
        shade = static_cast<int>(std::lround(200.0 - 180.0 * f));
      }
      const std::string g = std::to_string(shade);
      s += "<rect x=\"" + std::to_string(margin + static_cast<int>(c) * cell) + "\" y=\"" + std::to_string(y) +
           "\" width=\"" + std::to_string(cell - 1) + "\" height=\"" + std::to_string(cell - 1) + "\" fill=\"rgb(" +
           g + "," + g + "," + g + ")\" stroke=\"#999\"><title>" + io::format_double(v(r, c)) + "</title></rect>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

}  // namespace slsmeso::render
