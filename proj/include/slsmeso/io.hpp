#pragma once

// Text formats: long CSV for spectral elements, trajectories and message
// logs; JSON for structured reports. Node labels in files are 1-based.

#include "slsmeso/constraints.hpp"
#include "slsmeso/meso.hpp"
#include "slsmeso/simulate.hpp"
#include "slsmeso/spectral.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace slsmeso::io {

using json = nlohmann::json;

/// Thrown on unreadable or malformed input files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that round-trips at 17 significant digits.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw FormatError("not a number: '" + std::string(s) + "'");
  return v;
}

inline long parse_int(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw FormatError("not an integer: '" + std::string(s) + "'");
  return v;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Data rows of a CSV with the given header; blank lines are skipped.
inline std::vector<std::vector<std::string_view>> csv_rows(const std::string& text, std::string_view header,
                                                           const std::string& what) {
  std::vector<std::vector<std::string_view>> rows;
  std::string_view rest(text);
  bool first = true;
  const std::size_t cols = split(header).size();
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (first) {
      if (line != header) throw FormatError(what + ": expected header '" + std::string(header) + "'");
      first = false;
      continue;
    }
    auto fields = split(line);
    if (fields.size() != cols) throw FormatError(what + ": wrong field count in '" + std::string(line) + "'");
    rows.push_back(std::move(fields));
  }
  if (first) throw FormatError(what + ": empty file");
  return rows;
}

// ---- matrices ----

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected an array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw FormatError(what + ": ragged matrix");
    for (Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw FormatError(what + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline Matrix matrix_from_csv(const std::string& text, const std::string& what) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (auto f : split(line)) row.push_back(parse_double(f));
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError(what + ": ragged matrix");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

// ---- spectral elements ----

inline constexpr std::string_view kSpectralHeader = "k,row,col,which,value";

/// Every stored entry of R (which = 'R') or M (which = 'M').
inline std::string spectral_csv(const FIRPair& pair, char which) {
  require(which == 'R' || which == 'M', "spectral_csv: which must be R or M");
  std::string out(kSpectralHeader);
  out += '\n';
  const int first = which == 'R' ? 1 : pair.k0();
  for (int k = first; k <= pair.horizon(); ++k) {
    const Matrix& v = which == 'R' ? pair.R(k) : pair.M(k);
    for (Index r = 0; r < v.rows(); ++r)
      for (Index c = 0; c < v.cols(); ++c) {
        out += std::to_string(k) + ',' + std::to_string(r + 1) + ',' + std::to_string(c + 1) + ',' + which + ',' +
               format_double(v(r, c)) + '\n';
      }
  }
  return out;
}

/// Fills `pair` from a spectral CSV; entries not listed stay as they are.
inline void read_spectral_csv(const std::string& text, FIRPair& pair) {
  for (const auto& f : csv_rows(text, kSpectralHeader, "spectral csv")) {
    const int k = static_cast<int>(parse_int(f[0]));
    const Index r = parse_int(f[1]) - 1;
    const Index c = parse_int(f[2]) - 1;
    const std::string_view which = f[3];
    const double v = parse_double(f[4]);
    if (which == "R") {
      if (k < 1 || k > pair.horizon() || r < 0 || r >= pair.states() || c < 0 || c >= pair.states())
        throw FormatError("spectral csv: R entry out of range");
      pair.R_mut(k)(r, c) = v;
    } else if (which == "M") {
      if (k < pair.k0() || k > pair.horizon() || r < 0 || r >= pair.inputs() || c < 0 || c >= pair.states())
        throw FormatError("spectral csv: M entry out of range");
      pair.M_mut(k)(r, c) = v;
    } else {
      throw FormatError("spectral csv: unknown element '" + std::string(which) + "'");
    }
  }
}

/// {"horizon", "causality", "states", "inputs", "elements": [{"k", "R", "M"}]}
inline json spectral_to_json(const FIRPair& pair) {
  json j;
  j["horizon"] = pair.horizon();
  j["causality"] = to_string(pair.causality());
  j["states"] = pair.states();
  j["inputs"] = pair.inputs();
  json elems = json::array();
  for (int k = pair.k0(); k <= pair.horizon(); ++k) {
    json e;
    e["k"] = k;
    if (k >= 1) e["R"] = matrix_to_json(pair.R(k));
    e["M"] = matrix_to_json(pair.M(k));
    elems.push_back(std::move(e));
  }
  j["elements"] = std::move(elems);
  return j;
}

inline FIRPair spectral_from_json(const json& j) {
  try {
    const int T = j.at("horizon").get<int>();
    const Causality c = causality_from_string(j.at("causality").get<std::string>());
    FIRPair pair(j.at("states").get<Index>(), j.at("inputs").get<Index>(), T, c);
    for (const json& e : j.at("elements")) {
      const int k = e.at("k").get<int>();
      if (k < pair.k0() || k > T) throw FormatError("spectral json: element index " + std::to_string(k) + " out of range");
      if (e.contains("R")) {
        if (k < 1) throw FormatError("spectral json: R(0) must not be stored");
        const Matrix r = matrix_from_json(e["R"], "R(" + std::to_string(k) + ")");
        if (r.rows() != pair.states() || r.cols() != pair.states()) throw FormatError("spectral json: R has wrong shape");
        pair.R_mut(k) = r;
      }
      if (e.contains("M")) {
        const Matrix m = matrix_from_json(e["M"], "M(" + std::to_string(k) + ")");
        if (m.rows() != pair.inputs() || m.cols() != pair.states()) throw FormatError("spectral json: M has wrong shape");
        pair.M_mut(k) = m;
      }
    }
    return pair;
  } catch (const json::exception& e) {
    throw FormatError(std::string("spectral json: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("spectral json: ") + e.what());
  }
}

/// Allowed entries as (k,row,col,which).
inline std::string mask_csv(const SupportSpec& s) {
  std::string out = "k,row,col,which\n";
  auto emit = [&](int k, const Mask& m, char which) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c)
        if (m(r, c))
          out += std::to_string(k) + ',' + std::to_string(r + 1) + ',' + std::to_string(c + 1) + ',' + which + '\n';
  };
  for (int k = 1; k <= s.horizon; ++k) emit(k, s.r_mask(k), 'R');
  for (int k = s.k0(); k <= s.horizon; ++k) emit(k, s.m_mask(k), 'M');
  return out;
}

// ---- trajectories and messages ----

inline constexpr std::string_view kTrajectoryHeader = "t,signal,node,value";

/// Long format; u rows carry the actuated node label.
inline std::string trajectory_csv(const Trajectory& tr, const LinearSystem& sys) {
  std::string out(kTrajectoryHeader);
  out += '\n';
  auto emit = [&](const std::vector<Vector>& seq, const char* name, bool input) {
    for (std::size_t t = 0; t < seq.size(); ++t)
      for (Index i = 0; i < seq[t].size(); ++i) {
        const Index node = input ? sys.actuated()[static_cast<std::size_t>(i)] : i;
        out += std::to_string(t) + ',' + name + ',' + std::to_string(node + 1) + ',' + format_double(seq[t](i)) + '\n';
      }
  };
  emit(tr.x, "x", false);
  emit(tr.u, "u", true);
  emit(tr.w, "w", false);
  if (tr.has_internal()) {
    emit(tr.delta_hat, "delta_hat", false);
    emit(tr.x_hat, "x_hat", false);
  }
  return out;
}

inline constexpr std::string_view kMessageHeader = "t_send,t_deliver,from,to,source,value";

/// One row per scalar carried; a message is one (t_send, from, to) group.
inline std::string messages_csv(const MessageLog& log) {
  std::string out(kMessageHeader);
  out += '\n';
  for (const Message& m : log)
    for (const auto& [src, v] : m.payload)
      out += std::to_string(m.t_send) + ',' + std::to_string(m.t_deliver) + ',' + std::to_string(m.from + 1) + ',' +
             std::to_string(m.to + 1) + ',' + std::to_string(src + 1) + ',' + format_double(v) + '\n';
  return out;
}

inline constexpr std::string_view kDisturbanceHeader = "t,node,value";

/// Sparse disturbance file; unspecified entries are zero.
inline std::vector<Vector> read_disturbance_csv(const std::string& text, Index n, int steps) {
  std::vector<Vector> w(static_cast<std::size_t>(steps), Vector::Zero(n));
  for (const auto& f : csv_rows(text, kDisturbanceHeader, "disturbance csv")) {
    const long t = parse_int(f[0]);
    const long node = parse_int(f[1]);
    if (node < 1 || node > n) throw FormatError("disturbance csv: node " + std::to_string(node) + " out of range");
    if (t < 0) throw FormatError("disturbance csv: negative time");
    if (t < steps) w[static_cast<std::size_t>(t)](node - 1) += parse_double(f[2]);
  }
  return w;
}

// ---- reports ----

inline json census_to_json(const MesoReport& r) {
  json j;
  j["forward"] = r.forward_paths;
  j["predictive"] = r.predictive_ifps;
  j["communicative"] = r.communicative_ifps;
  j["source_links"] = r.source_links;
  j["in_links"] = r.in_links;
  j["remote_sources"] = r.remote_sources;
  if (r.ratio)
    j["ratio_total_ifp_to_forward"] = *r.ratio;
  else
    j["ratio_total_ifp_to_forward"] = r.ratio_text();
  return j;
}

inline json memory_to_json(const MemoryReport& r) {
  json j;
  json nodes = json::array();
  for (std::size_t i = 0; i < r.per_node.size(); ++i) {
    json patch = json::array();
    for (const PatchEntry& e : r.per_node[i])
      patch.push_back({{"source", e.source + 1}, {"hops", e.hops}, {"delay", e.delay}, {"depth", e.depth}});
    nodes.push_back({{"node", i + 1}, {"patch", std::move(patch)}});
  }
  j["nodes"] = std::move(nodes);
  json copies = json::array();
  for (std::size_t i = 0; i < r.copies.size(); ++i) copies.push_back({{"disturbance", i + 1}, {"copies", r.copies[i]}});
  j["redundancy"] = std::move(copies);
  j["memory_total"] = r.total;
  return j;
}

}  // namespace slsmeso::io
