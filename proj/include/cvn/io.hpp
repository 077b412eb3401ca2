#pragma once

// File formats: CSV tables and matrices, canonical JSON, fit files, simulator
// truth files, and weight-matrix specifications.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvn/adjacency.hpp"
#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"
#include "cvn/model.hpp"
#include "cvn/simulate.hpp"
#include "cvn/solver.hpp"

namespace cvn {

using Json = nlohmann::json;

inline constexpr const char* kFitVersion = "cvn-fit/1";
inline constexpr const char* kTruthAdjacencyVersion = "cvn-truth-adjacency/1";
inline constexpr const char* kTruthPrecisionVersion = "cvn-truth-precision/1";
inline constexpr const char* kSimConfigVersion = "cvn-sim-config/1";
inline constexpr const char* kAdjacencyVersion = "cvn-adjacency/1";

/// Raised for unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// 17 significant digits, so the text parses back to the same double.
/// Negative zero is written as 0.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw NumericError("cannot format a non-finite value");
  if (v == 0.0) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("line " + std::to_string(line_no) + ": unterminated quote");
  cells.push_back(std::move(cur));
  return cells;
}

inline std::vector<std::vector<std::string>> parse_csv_lines(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(split_csv_line(line, line_no));
  }
  return out;
}

}  // namespace detail

/// CSV with a header row; blank lines are skipped.
inline LongTable parse_long_table(const std::string& text) {
  auto lines = detail::parse_csv_lines(text);
  if (lines.empty()) throw EmptyData("CSV has no header");
  LongTable t;
  t.header = std::move(lines.front());
  t.rows.assign(std::make_move_iterator(lines.begin() + 1), std::make_move_iterator(lines.end()));
  return t;
}

inline LongTable read_long_table(const std::filesystem::path& path) { return parse_long_table(read_file(path)); }

inline std::string long_table_csv(const LongTable& t) {
  std::ostringstream os;
  auto row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  row(t.header);
  for (const auto& r : t.rows) row(r);
  return os.str();
}

/// Dense, row-major, no header.
inline std::string matrix_csv(const Matrix& a) {
  std::ostringstream os;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) os << (j ? "," : "") << format_double(a(i, j));
    os << '\n';
  }
  return os.str();
}

inline Matrix parse_matrix_csv(const std::string& text) {
  const auto lines = detail::parse_csv_lines(text);
  if (lines.empty()) throw EmptyData("matrix CSV is empty");
  const auto cols = lines.front().size();
  Matrix a(static_cast<Index>(lines.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].size() != cols)
      throw ParseError("matrix CSV row " + std::to_string(i + 1) + ": expected " + std::to_string(cols) +
                       " cells, got " + std::to_string(lines[i].size()));
    for (std::size_t j = 0; j < cols; ++j)
      a(static_cast<Index>(i), static_cast<Index>(j)) = parse_double(lines[i][j], i, std::to_string(j + 1));
  }
  return a;
}

// JSON

namespace detail {

inline void write_json(std::ostringstream& os, const Json& j, int depth) {
  auto indent = [&](int d) { os << '\n' << std::string(static_cast<std::size_t>(2 * d), ' '); };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map storage: sorted keys
        if (!first) os << ',';
        first = false;
        indent(depth + 1);
        os << Json(it.key()).dump() << ": ";
        write_json(os, it.value(), depth + 1);
      }
      indent(depth);
      os << '}';
      return;
    }
    case Json::value_t::array: {
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      os << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << (flat ? ", " : ",");
        if (!flat) indent(depth + 1);
        write_json(os, j[i], depth + 1);
      }
      if (!flat && !j.empty()) indent(depth);
      os << ']';
      return;
    }
    case Json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Canonical text: sorted keys, two-space indentation, scalar arrays on one
/// line, doubles with 17 significant digits, trailing newline.
inline std::string canonical_json(const Json& j) {
  std::ostringstream os;
  detail::write_json(os, j, 0);
  os << '\n';
  return os.str();
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(what + ": invalid JSON: " + e.what());
  }
}

inline Json matrix_to_json(const Matrix& a) {
  Json rows = Json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j, Index p, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != p)
    throw ParseError(what + ": expected " + std::to_string(p) + " rows");
  Matrix a(p, p);
  for (Index i = 0; i < p; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != p)
      throw ParseError(what + ": row " + std::to_string(i + 1) + " must have " + std::to_string(p) + " entries");
    for (Index k = 0; k < p; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw ParseError(what + ": non-numeric entry");
      a(i, k) = v.get<double>();
    }
  }
  return a;
}

inline Json edges_to_json(const Adjacency& a) {
  Json out = Json::array();
  for (const auto& [s, t] : a.edges()) out.push_back(Json::array({s, t}));
  return out;
}

inline Adjacency edges_from_json(const Json& j, int p, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": edges must be an array");
  Adjacency a(p);
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw ParseError(what + ": each edge must be a pair of integers");
    const int s = e[0].get<int>(), t = e[1].get<int>();
    if (s < 0 || t < 0 || s >= p || t >= p || s == t) throw ParseError(what + ": edge index out of range");
    if (a(s, t)) throw ParseError(what + ": duplicate edge");
    a.set(s, t, true);
  }
  return a;
}

namespace detail {

template <class T>
T require(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ParseError(what + ": field '" + std::string(key) + "' has the wrong type");
  }
}

inline void require_version(const Json& j, const char* expected, const std::string& what) {
  const auto v = require<std::string>(j, "version", what);
  if (v != expected) throw ParseError(what + ": unsupported version '" + v + "' (expected " + expected + ")");
}

}  // namespace detail

// fit files

/// Edge indices are 0-based positions in `variables`.
inline Json fit_to_json(const CvnFit& f) {
  Json j;
  j["version"] = kFitVersion;
  j["p"] = f.p;
  j["m"] = f.m;
  j["keys"] = f.keys;
  j["variables"] = f.variables;
  j["n"] = f.n;
  j["lambda1"] = f.penalties.lambda1;
  j["lambda2"] = f.penalties.lambda2;
  if (f.gammas) {
    j["gamma1"] = f.gammas->gamma1;
    j["gamma2"] = f.gammas->gamma2;
  }
  j["rho"] = f.rho;
  j["eps"] = f.eps;
  j["tau"] = f.tau;
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["final_relative_change"] = f.final_relative_change;
  Json graphs = Json::array();
  for (std::size_t i = 0; i < f.theta.size(); ++i) {
    Json g;
    g["key"] = f.keys[i];
    g["theta"] = matrix_to_json(f.theta[i].mat());
    g["z"] = matrix_to_json(f.z[i].mat());
    g["edges"] = edges_to_json(f.adjacency[i]);
    graphs.push_back(std::move(g));
  }
  j["graphs"] = std::move(graphs);
  return j;
}

inline std::string fit_to_string(const CvnFit& f) { return canonical_json(fit_to_json(f)); }

/// Restores a fit. The stored edge lists must agree with z and tau.
inline CvnFit fit_from_json(const Json& j) {
  const std::string what = "fit file";
  detail::require_version(j, kFitVersion, what);
  CvnFit f;
  f.p = detail::require<int>(j, "p", what);
  f.m = detail::require<int>(j, "m", what);
  if (f.p < 1 || f.m < 1) throw ParseError(what + ": p and m must be positive");
  f.keys = detail::require<std::vector<GraphKey>>(j, "keys", what);
  f.variables = detail::require<std::vector<std::string>>(j, "variables", what);
  f.n = detail::require<std::vector<int>>(j, "n", what);
  f.penalties = {detail::require<double>(j, "lambda1", what), detail::require<double>(j, "lambda2", what)};
  if (j.contains("gamma1") || j.contains("gamma2"))
    f.gammas = Gammas{detail::require<double>(j, "gamma1", what), detail::require<double>(j, "gamma2", what)};
  f.rho = detail::require<double>(j, "rho", what);
  f.eps = detail::require<double>(j, "eps", what);
  f.tau = detail::require<double>(j, "tau", what);
  f.iterations = detail::require<int>(j, "iterations", what);
  f.converged = detail::require<bool>(j, "converged", what);
  f.final_relative_change = detail::require<double>(j, "final_relative_change", what);
  const auto m = static_cast<std::size_t>(f.m);
  if (f.keys.size() != m || f.n.size() != m || f.variables.size() != static_cast<std::size_t>(f.p))
    throw ParseError(what + ": keys, n, or variables have the wrong length");
  const auto& graphs = j.at("graphs");
  if (!graphs.is_array() || graphs.size() != m) throw ParseError(what + ": expected " + std::to_string(m) + " graphs");
  for (std::size_t i = 0; i < m; ++i) {
    const auto& g = graphs[i];
    const std::string gw = what + ", graph " + std::to_string(i + 1);
    if (detail::require<GraphKey>(g, "key", gw) != f.keys[i]) throw ParseError(gw + ": key mismatch");
    try {
      f.theta.push_back(SymMat::checked(matrix_from_json(g.at("theta"), f.p, gw + " theta")));
      f.z.push_back(SymMat::checked(matrix_from_json(g.at("z"), f.p, gw + " z")));
    } catch (const NumericError& e) {
      throw ParseError(gw + ": " + e.what());
    } catch (const Json::exception&) {
      throw ParseError(gw + ": missing theta or z");
    }
    if (!g.contains("edges")) throw ParseError(gw + ": missing field 'edges'");
    Adjacency a = edges_from_json(g.at("edges"), f.p, gw);
    if (!(a == extract_adjacency(f.z.back(), f.tau)))
      throw ParseError(gw + ": edge list is inconsistent with z and tau");
    f.adjacency.push_back(std::move(a));
  }
  return f;
}

inline CvnFit read_fit(const std::filesystem::path& path) {
  return fit_from_json(parse_json(read_file(path), path.string()));
}

// simulator files

inline Json key_to_json(const std::pair<int, int>& k) {
  return Json::array({std::to_string(k.first), std::to_string(k.second)});
}

inline Json truth_adjacency_to_json(const SimTruth& t) {
  Json j;
  j["version"] = kTruthAdjacencyVersion;
  j["p"] = t.adjacency.front().dim();
  Json graphs = Json::array();
  for (std::size_t i = 0; i < t.adjacency.size(); ++i)
    graphs.push_back({{"key", key_to_json(t.keys[i])}, {"edges", edges_to_json(t.adjacency[i])}});
  j["graphs"] = std::move(graphs);
  return j;
}

struct KeyedGraphs {
  std::vector<GraphKey> keys;
  std::vector<Adjacency> graphs;
};

inline KeyedGraphs truth_adjacency_from_json(const Json& j) {
  const std::string what = "truth adjacency file";
  detail::require_version(j, kTruthAdjacencyVersion, what);
  const int p = detail::require<int>(j, "p", what);
  if (p < 1) throw ParseError(what + ": p must be positive");
  KeyedGraphs out;
  if (!j.contains("graphs") || !j.at("graphs").is_array()) throw ParseError(what + ": missing graphs");
  for (const auto& g : j.at("graphs")) {
    out.keys.push_back(detail::require<GraphKey>(g, "key", what));
    if (!g.contains("edges")) throw ParseError(what + ": missing field 'edges'");
    out.graphs.push_back(edges_from_json(g.at("edges"), p, what));
  }
  return out;
}

inline Json truth_precision_to_json(const SimTruth& t) {
  Json j;
  j["version"] = kTruthPrecisionVersion;
  j["p"] = t.precision.front().dim();
  Json graphs = Json::array();
  for (std::size_t i = 0; i < t.precision.size(); ++i)
    graphs.push_back({{"key", key_to_json(t.keys[i])}, {"precision", matrix_to_json(t.precision[i].mat())}});
  j["graphs"] = std::move(graphs);
  return j;
}

inline Json sim_config_to_json(const SimConfig& c, const SimTruth& t) {
  Json j;
  j["version"] = kSimConfigVersion;
  j["p"] = c.p;
  j["n"] = c.n;
  j["graph_type"] = to_string(c.graph_type);
  j["pi"] = c.pi;
  j["pi1"] = c.pi1;
  j["pi2"] = c.pi2;
  j["v"] = c.v;
  j["u"] = c.u;
  j["ba_edges"] = c.ba_edges;
  j["seed"] = c.seed;
  j["b1"] = t.b1;
  j["b2"] = t.b2;
  j["start_edges"] = t.start_edges;
  return j;
}

/// Long-format data: columns u1, u2, X1..Xp; graphs in key order.
inline std::string sim_data_csv(const SimTruth& t) {
  std::ostringstream os;
  const auto p = t.data.front().cols();
  os << "u1,u2";
  for (Index s = 0; s < p; ++s) os << ",X" << s + 1;
  os << '\n';
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const auto& x = t.data[i];
    for (Index r = 0; r < x.rows(); ++r) {
      os << t.keys[i].first << ',' << t.keys[i].second;
      for (Index s = 0; s < p; ++s) os << ',' << format_double(x(r, s));
      os << '\n';
    }
  }
  return os.str();
}

inline Json adjacency_to_json(const Adjacency& a) {
  Json j;
  j["version"] = kAdjacencyVersion;
  j["p"] = a.dim();
  j["edges"] = edges_to_json(a);
  return j;
}

// weights

namespace detail {

inline int parse_positive_int(const std::string& s, const std::string& spec) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
    throw ParseError("weight spec '" + spec + "': '" + s + "' is not a positive integer");
  return v;
}

}  // namespace detail

/// One of: tvgl:T, fgl:M, grid:RxC, zero:M, or a path to an m x m CSV.
inline WeightMatrix load_weights(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    if (kind == "tvgl") return weights_tvgl(detail::parse_positive_int(arg, spec));
    if (kind == "fgl") return weights_fgl(detail::parse_positive_int(arg, spec));
    if (kind == "zero") return WeightMatrix::zero(detail::parse_positive_int(arg, spec));
    if (kind == "grid") {
      const auto x = arg.find('x');
      if (x == std::string::npos) throw ParseError("weight spec '" + spec + "': expected grid:RxC");
      return weights_grid(detail::parse_positive_int(arg.substr(0, x), spec),
                          detail::parse_positive_int(arg.substr(x + 1), spec));
    }
  }
  if (!std::filesystem::exists(spec)) throw IoError("weight spec '" + spec + "' is neither a known form nor a file");
  return WeightMatrix(parse_matrix_csv(read_file(spec)));
}

}  // namespace cvn
