#pragma once
// Serialization: LFR models and gains as JSON documents, CSV tables and the
// per-run manifest.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oos/error.hpp"
#include "oos/scenario.hpp"
#include "oos/sslft.hpp"
#include "oos/synthesis.hpp"

namespace oos {

inline constexpr const char* kToolVersion = "1.0.0";

namespace io {

using json = nlohmann::json;

inline json matrix_json(const Matrix& M) {
  json d = json::array();
  for (Index i = 0; i < M.rows(); ++i)
    for (Index k = 0; k < M.cols(); ++k) d.push_back(M(i, k));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", d}};
}

inline Matrix matrix_from(const json& j, const std::string& path) {
  try {
    const Index r = j.at("rows").get<Index>(), c = j.at("cols").get<Index>();
    const auto& d = j.at("data");
    if (r < 0 || c < 0 || d.size() != static_cast<std::size_t>(r * c))
      throw Error(Errc::parse_error, path + ": data size does not match rows x cols");
    Matrix M(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index k = 0; k < c; ++k) M(i, k) = d[static_cast<std::size_t>(i * c + k)].get<double>();
    return M;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path + ": " + e.what());
  }
}

inline const char* kind_name(BlockKind k) { return k == BlockKind::real_scalar ? "real_scalar" : "complex_full"; }

inline json model_json(const LfrModel& m) {
  json blocks = json::array();
  for (auto& b : m.blocks)
    blocks.push_back({{"name", b.name}, {"parameter", b.parameter}, {"kind", kind_name(b.kind)},
                      {"rows", b.rows}, {"cols", b.cols}, {"lo", b.lo}, {"hi", b.hi}});
  return {{"format", "oos-lfr"},
          {"version", 1},
          {"inputs", m.core.inputs()},
          {"outputs", m.core.outputs()},
          {"A", matrix_json(m.core.A())},
          {"B", matrix_json(m.core.B())},
          {"C", matrix_json(m.core.C())},
          {"D", matrix_json(m.core.D())},
          {"blocks", blocks},
          {"groups", m.groups}};
}

inline LfrModel model_from(const json& j) {
  try {
    if (j.value("format", "") != "oos-lfr") throw Error(Errc::parse_error, "not an LFR model document");
    std::vector<UncertaintyBlock> blocks;
    for (auto& b : j.at("blocks")) {
      UncertaintyBlock u;
      u.name = b.at("name").get<std::string>();
      u.parameter = b.at("parameter").get<std::string>();
      const auto kind = b.at("kind").get<std::string>();
      if (kind != "real_scalar" && kind != "complex_full") throw Error(Errc::parse_error, "block kind '" + kind + "'");
      u.kind = kind == "real_scalar" ? BlockKind::real_scalar : BlockKind::complex_full;
      u.rows = b.at("rows").get<Index>();
      u.cols = b.at("cols").get<Index>();
      u.lo = b.at("lo").get<double>();
      u.hi = b.at("hi").get<double>();
      blocks.push_back(u);
    }
    StateSpaceModel core(matrix_from(j.at("A"), "A"), matrix_from(j.at("B"), "B"), matrix_from(j.at("C"), "C"),
                         matrix_from(j.at("D"), "D"), j.at("inputs").get<Labels>(), j.at("outputs").get<Labels>());
    return make_lfr(core, blocks, j.at("groups").get<std::map<std::string, Labels>>());
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

inline void write_text(const std::string& path, const std::string& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::invalid_argument, "cannot write '" + path + "'");
  out << s;
}

inline json read_json(const std::string& path) { return read_json_file(path); }

inline void save_model(const LfrModel& m, const std::string& path) { write_text(path, model_json(m).dump(1) + "\n"); }
inline LfrModel load_model(const std::string& path) { return model_from(read_json(path)); }

inline json gains_json(const ControllerGains& g) {
  return {{"format", "oos-gains"}, {"K", matrix_json(g.K)}, {"k_att", matrix_json(g.k_att())},
          {"c_att", matrix_json(g.c_att())}};
}

inline ControllerGains gains_from(const json& j) {
  if (!j.is_object() || j.value("format", "") != "oos-gains") throw Error(Errc::parse_error, "not a gains document");
  ControllerGains g;
  const Matrix K = matrix_from(j.at("K"), "K");
  if (K.rows() != 3 || K.cols() != 6 || !K.allFinite())
    throw Error(Errc::validation_error, "gains must be a finite 3x6 matrix");
  g.K = K;
  return g;
}

inline void save_gains(const ControllerGains& g, const std::string& path) { write_text(path, gains_json(g).dump(1) + "\n"); }
inline ControllerGains load_gains(const std::string& path) { return gains_from(read_json(path)); }

// Shortest text that parses back to the same double.
inline std::string num(double v) {
  char buf[40];
  for (int p = 6; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> r) {
    if (r.size() != header.size()) throw Error(Errc::dimension_mismatch, "csv row width");
    rows.push_back(std::move(r));
  }
  void add(const std::vector<double>& r) {
    std::vector<std::string> s;
    for (double v : r) s.push_back(num(v));
    add(std::move(s));
  }
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(Errc::unknown_channel, "csv column '" + name + "'");
  }
  std::vector<double> numbers(const std::string& name) const {
    const auto c = column(name);
    std::vector<double> v;
    for (auto& r : rows) v.push_back(std::stod(r[c]));
    return v;
  }
  std::string str() const {
    std::ostringstream o;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << r[i];
      o << "\n";
    };
    line(header);
    for (auto& r : rows) line(r);
    return o.str();
  }
  void save(const std::string& path) const { write_text(path, str()); }
};

inline Csv parse_csv(const std::string& text) {
  Csv c;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      c.header = cells;
      first = false;
    } else {
      c.add(cells);
    }
  }
  return c;
}

inline Csv load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::parse_error, "cannot open '" + path + "'");
  std::stringstream s;
  s << in.rdbuf();
  return parse_csv(s.str());
}

// Human-readable channel and uncertainty-structure listing.
inline std::string structure_audit(const LfrModel& m) {
  std::ostringstream o;
  o << "states " << m.core.states() << "\n";
  o << "uncertainty blocks (diag order) " << m.blocks.size() << ", w " << m.w_size() << ", z " << m.z_size() << "\n";
  for (auto& b : m.blocks)
    o << "  " << b.name << "  parameter=" << b.parameter << "  kind=" << kind_name(b.kind) << "  size=" << b.rows
      << "x" << b.cols << "  range=[" << num(b.lo) << ", " << num(b.hi) << "]\n";
  std::map<std::string, Index> occ;
  for (auto& b : m.blocks) occ[b.parameter] += b.repetitions();
  o << "parameter occurrences\n";
  for (auto& [p, n] : occ) o << "  " << p << " x" << n << "\n";
  o << "inputs\n";
  for (auto& l : m.core.inputs())
    if (l.rfind("delta.", 0) != 0) o << "  " << l << "\n";
  o << "outputs\n";
  for (auto& l : m.core.outputs())
    if (l.rfind("delta.", 0) != 0) o << "  " << l << "\n";
  for (auto& [g, ls] : m.groups) {
    o << "group " << g << ":";
    for (auto& l : ls) o << " " << l;
    o << "\n";
  }
  return o.str();
}

struct RunManifest {
  std::string command, config, out;
  std::map<std::string, std::string> overrides;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;

  json to_json() const {
    return {{"command", command}, {"config", config}, {"overrides", overrides}, {"out", out},
            {"seed", seed},       {"version", version}};
  }
  void save() const { write_text(out + "/manifest.json", to_json().dump(2) + "\n"); }
};

}  // namespace io
}  // namespace oos
