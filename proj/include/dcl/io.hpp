#pragma once

// CSV matrices, datasets, ground-truth model directories and INI-style configs.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "dcl/pipeline.hpp"
#include "dcl/simulator.hpp"

namespace dcl {

namespace fs = std::filesystem;

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError(where + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  for (;;) {
    const size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string matrix_to_csv(const Matrix& m) {
  std::string s;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) s += ',';
      s += format_double(m(i, j));
    }
    s += '\n';
  }
  return s;
}

inline void write_text(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_matrix_csv(const fs::path& path, const Matrix& m) { write_text(path, matrix_to_csv(m)); }

namespace detail {
inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline Matrix parse_grid(const std::vector<std::string>& lines, size_t first, const std::string& where) {
  const Index rows = static_cast<Index>(lines.size() - first);
  if (rows == 0) return Matrix(0, 0);
  const Index cols = static_cast<Index>(split_commas(lines[first]).size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto cells = split_commas(lines[first + static_cast<size_t>(i)]);
    if (static_cast<Index>(cells.size()) != cols)
      throw IoError(where + ": ragged row " + std::to_string(first + static_cast<size_t>(i) + 1));
    for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(cells[static_cast<size_t>(j)], where);
  }
  return m;
}
}  // namespace detail

/// Plain numeric grid without header. An empty file is a 0x0 matrix.
inline Matrix read_matrix_csv(const fs::path& path) {
  return detail::parse_grid(detail::lines_of(read_text(path)), 0, path.string());
}

inline void write_dataset_csv(const fs::path& path, const Matrix& x) {
  std::string s;
  for (Index j = 0; j < x.cols(); ++j) {
    if (j) s += ',';
    s += "x" + std::to_string(j + 1);
  }
  s += '\n';
  write_text(path, s + matrix_to_csv(x));
}

/// Header row `x1,...,xp` followed by one sample per row.
inline Dataset read_dataset_csv(const fs::path& path) {
  const auto lines = detail::lines_of(read_text(path));
  if (lines.empty()) throw IoError(path.string() + ": empty dataset");
  const auto header = split_commas(lines[0]);
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] != "x" + std::to_string(j + 1)) throw IoError(path.string() + ": header must be x1,...,xp");
  Dataset d;
  d.X = detail::parse_grid(lines, 1, path.string());
  if (d.X.rows() == 0) d.X = Matrix(0, static_cast<Index>(header.size()));
  if (d.X.cols() != static_cast<Index>(header.size())) throw IoError(path.string() + ": row width differs from header");
  return d;
}

// ---------------------------------------------------------------------------
// Configuration: `key = value` lines grouped in [simulator], [lvglasso],
// [decor], [baseline] and [experiment] sections.

namespace pt = boost::property_tree;

inline pt::ptree read_ini(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("config not found: " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  return tree;
}

namespace detail {
class SectionReader {
 public:
  SectionReader(const pt::ptree& tree, std::string section) : section_(std::move(section)) {
    if (auto child = tree.get_child_optional(section_)) node_ = &*child;
  }

  template <class T>
  void get(const std::string& key, T& value) {
    seen_.insert(key);
    if (!node_) return;
    auto raw = node_->get_optional<std::string>(key);
    if (!raw) return;
    try {
      value = node_->get<T>(key);
    } catch (const pt::ptree_error&) {
      throw InvalidConfig("config: [" + section_ + "] " + key + " has invalid value '" + *raw + "'");
    }
  }

  void reject_unknown() const {
    if (!node_) return;
    for (const auto& kv : *node_)
      if (!seen_.count(kv.first)) throw InvalidConfig("config: unknown key [" + section_ + "] " + kv.first);
  }

 private:
  std::string section_;
  const pt::ptree* node_ = nullptr;
  std::set<std::string> seen_;
};

inline void read_decor(SectionReader& r, DecorGlConfig& c) {
  r.get("lambda_B", c.lambda_B);
  r.get("lambda_S", c.lambda_S);
  r.get("tau_B", c.tau_B);
  r.get("tau_Gamma", c.tau_Gamma);
  r.get("bow_c", c.bow_c);
  r.get("rho_init", c.al.rho_init);
  r.get("rho_mult", c.al.rho_mult);
  r.get("alpha_init", c.al.alpha_init);
  r.get("h_tol", c.al.h_tol);
  r.get("max_outer", c.al.max_outer);
  r.get("inner_max_iter", c.inner.max_iter);
  r.get("inner_tol", c.inner.tol);
  r.get("max_rounds", c.alternation.max_rounds);
  r.get("alternation_tol", c.alternation.tol);
  r.get("refine_orientation", c.refine_orientation);
}
}  // namespace detail

struct RunConfig {
  SimConfig sim;
  MethodConfigs methods;
};

inline void validate(const RunConfig& c) {
  try {
    c.sim.validate();
    c.methods.dcl.lvglasso.validate();
    c.methods.dcl.decor.validate();
    c.methods.decor_gl.validate();
    c.methods.notears.validate();
  } catch (const std::invalid_argument& e) {
    throw InvalidConfig(e.what());
  }
}

/// [simulator], [lvglasso], [decor] (pipeline stage III) and [baseline]
/// (standalone decor_gl and notears). [experiment] is left to the harness.
inline RunConfig parse_run_config(const pt::ptree& tree) {
  RunConfig c;
  for (const auto& kv : tree) {
    static const std::set<std::string> known{"simulator", "lvglasso", "decor", "baseline", "experiment"};
    if (!known.count(kv.first)) throw InvalidConfig("config: unknown section [" + kv.first + "]");
  }
  {
    detail::SectionReader r(tree, "simulator");
    r.get("p", c.sim.p);
    r.get("n", c.sim.n);
    r.get("edge_density", c.sim.edge_density);
    r.get("weight_lo", c.sim.weight_lo);
    r.get("weight_hi", c.sim.weight_hi);
    r.get("idio_variance", c.sim.idio_variance);
    r.get("r_S", c.sim.r_S);
    r.get("s_active", c.sim.s_active);
    r.get("v_loading_sd", c.sim.v_loading_sd);
    r.get("q_P", c.sim.q_P);
    r.get("U_d", c.sim.U_d);
    r.get("seed", c.sim.seed);
    r.reject_unknown();
  }
  {
    detail::SectionReader r(tree, "lvglasso");
    auto& l = c.methods.dcl.lvglasso;
    r.get("lambda_s", l.lambda_s);
    r.get("lambda_star", l.lambda_star);
    r.get("rho_admm", l.rho_admm);
    r.get("max_iter", l.max_iter);
    r.get("tol_primal", l.tol_primal);
    r.get("tol_dual", l.tol_dual);
    r.get("standardize", c.methods.dcl.standardize_input);
    r.reject_unknown();
  }
  {
    detail::SectionReader r(tree, "decor");
    detail::read_decor(r, c.methods.dcl.decor);
    r.reject_unknown();
  }
  {
    detail::SectionReader r(tree, "baseline");
    detail::read_decor(r, c.methods.decor_gl);
    c.methods.notears = c.methods.decor_gl;
    r.reject_unknown();
  }
  validate(c);
  return c;
}

inline RunConfig load_run_config(const fs::path& path) { return parse_run_config(read_ini(path)); }

inline std::string sim_config_text(const SimConfig& c) {
  std::ostringstream s;
  s << "[simulator]\n"
    << "p = " << c.p << "\n"
    << "n = " << c.n << "\n"
    << "edge_density = " << format_double(c.edge_density) << "\n"
    << "weight_lo = " << format_double(c.weight_lo) << "\n"
    << "weight_hi = " << format_double(c.weight_hi) << "\n"
    << "idio_variance = " << format_double(c.idio_variance) << "\n"
    << "r_S = " << c.r_S << "\n"
    << "s_active = " << c.s_active << "\n"
    << "v_loading_sd = " << format_double(c.v_loading_sd) << "\n"
    << "q_P = " << c.q_P << "\n"
    << "U_d = " << format_double(c.U_d) << "\n"
    << "seed = " << c.seed << "\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// Ground-truth model directory: B.csv, W.csv (noise sds, one per row), V.csv,
// U.csv and meta.txt.

inline void write_model(const fs::path& dir, const GroundTruthModel& m, const SimConfig& cfg) {
  fs::create_directories(dir);
  write_matrix_csv(dir / "B.csv", m.B);
  write_matrix_csv(dir / "W.csv", Matrix(m.W));
  write_matrix_csv(dir / "V.csv", m.V);
  write_matrix_csv(dir / "U.csv", m.U);
  std::ostringstream meta;
  meta << "p = " << m.p << "\n"
       << "r_S = " << m.r_S() << "\n"
       << "r_L = " << m.r_L() << "\n"
       << "seed = " << m.seed << "\n\n"
       << sim_config_text(cfg);
  write_text(dir / "meta.txt", meta.str());
}

inline GroundTruthModel read_model(const fs::path& dir) {
  pt::ptree meta;
  try {
    const std::string text = read_text(dir / "meta.txt");
    std::istringstream in(text);
    pt::read_ini(in, meta);
  } catch (const pt::ptree_error& e) {
    throw IoError(std::string("meta.txt: ") + e.what());
  }
  GroundTruthModel m;
  m.p = meta.get<int>("p", 0);
  const Index rs = meta.get<Index>("r_S", 0), rl = meta.get<Index>("r_L", 0);
  m.seed = meta.get<std::uint64_t>("seed", 0);
  const auto load = [&](const char* name, Index rows, Index cols) {
    Matrix x = read_matrix_csv(dir / name);
    if (rows * cols == 0) return Matrix(rows, cols);
    if (x.rows() != rows || x.cols() != cols) throw IoError(std::string(name) + ": unexpected shape");
    return x;
  };
  m.B = load("B.csv", m.p, m.p);
  m.W = load("W.csv", m.p, 1).col(0);
  m.V = load("V.csv", m.p, rs);
  m.U = load("U.csv", m.p, rl);
  return m;
}

}  // namespace dcl
