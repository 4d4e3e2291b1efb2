#ifndef LRPSGES_IO_HPP
#define LRPSGES_IO_HPP

// File formats: headered CSV matrices, ground-truth JSON sidecars, results
// JSON, and atomically written run manifests.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrpsges/errors.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/matcore.hpp"
#include "lrpsges/simsem.hpp"
#include "lrpsges/tune_eval.hpp"

namespace lrpsges {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Shortest round-trip-safe text (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header "x0,...,x{p-1}", then one line per row.
inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) out += ',';
    out += 'x' + std::to_string(j);
  }
  out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Matrix parse_matrix_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("CSV is empty");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  const auto p = static_cast<Eigen::Index>(header.size());
  if (p == 0) throw FormatError("CSV header is empty");
  std::vector<double> values;
  long rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Eigen::Index count = 0;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw FormatError("CSV row " + std::to_string(rows + 1) + ": bad number '" + cell + "'");
      }
      if (used != cell.size()) throw FormatError("CSV row " + std::to_string(rows + 1) + ": bad number '" + cell + "'");
      values.push_back(v);
      ++count;
    }
    if (count != p) throw FormatError("CSV row " + std::to_string(rows + 1) + " has the wrong number of fields");
    ++rows;
  }
  Matrix m(rows, p);
  for (long i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = values[static_cast<std::size_t>(i * p + j)];
  return m;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file, then renames it over `path`.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) { return parse_matrix_csv(read_text(path)); }
inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  write_text_atomic(path, matrix_to_csv(m));
}
inline Pdag read_pdag(const std::filesystem::path& path) { return parse_edge_list(read_text(path)); }
inline void write_pdag(const std::filesystem::path& path, const Pdag& g) { write_text_atomic(path, to_edge_list(g)); }

// ---------------------------------------------------------------------------
// JSON encodings

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw FormatError("matrix JSON has wrong row count");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) throw FormatError("matrix JSON has wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Json to_json(const SimDesign& d) {
  return Json{{"p", d.p},
              {"h", d.h},
              {"n", d.n},
              {"f_pct", d.f_pct},
              {"sparsity", d.sparsity},
              {"weight_lo", d.weight_lo},
              {"weight_hi", d.weight_hi},
              {"noise_lo", d.noise_lo},
              {"noise_hi", d.noise_hi},
              {"seed", d.seed}};
}

inline SimDesign design_from_json(const Json& j) {
  SimDesign d;
  d.p = j.at("p").get<int>();
  d.h = j.at("h").get<int>();
  d.n = j.at("n").get<long>();
  d.f_pct = j.at("f_pct").get<double>();
  d.sparsity = j.at("sparsity").get<double>();
  d.weight_lo = j.at("weight_lo").get<double>();
  d.weight_hi = j.at("weight_hi").get<double>();
  d.noise_lo = j.at("noise_lo").get<double>();
  d.noise_hi = j.at("noise_hi").get<double>();
  d.seed = j.at("seed").get<std::uint64_t>();
  return d;
}

/// Ground-truth sidecar. Hidden-variable fields are omitted when h = 0.
inline Json truth_to_json(const SimDesign& design, const LinearSem& sem) {
  Json j{{"design", to_json(design)}, {"seed", design.seed}, {"p", sem.p}, {"b_o", to_json(sem.b_o)}};
  std::vector<double> noise(sem.noise_var.data(), sem.noise_var.data() + sem.p);
  j["noise_var"] = noise;
  if (sem.h > 0) {
    j["h"] = sem.h;
    j["b_oh"] = to_json(sem.b_oh);
    j["hidden_noise_var"] = std::vector<double>(sem.noise_var.data() + sem.p, sem.noise_var.data() + sem.p + sem.h);
  }
  return j;
}

inline LinearSem sem_from_json(const Json& j) {
  LinearSem sem;
  try {
    sem.p = j.at("p").get<int>();
    sem.h = j.value("h", 0);
    sem.b_o = matrix_from_json(j.at("b_o"), sem.p, sem.p);
    sem.b_oh = sem.h > 0 ? matrix_from_json(j.at("b_oh"), sem.p, sem.h) : Matrix::Zero(sem.p, 0);
    sem.b_h = Matrix::Zero(sem.h, sem.h);
    sem.noise_var.resize(sem.p + sem.h);
    const auto obs = j.at("noise_var").get<std::vector<double>>();
    if (static_cast<int>(obs.size()) != sem.p) throw FormatError("noise_var has wrong length");
    for (int i = 0; i < sem.p; ++i) sem.noise_var(i) = obs[static_cast<std::size_t>(i)];
    if (sem.h > 0) {
      const auto hid = j.at("hidden_noise_var").get<std::vector<double>>();
      if (static_cast<int>(hid.size()) != sem.h) throw FormatError("hidden_noise_var has wrong length");
      for (int k = 0; k < sem.h; ++k) sem.noise_var(sem.p + k) = hid[static_cast<std::size_t>(k)];
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("truth JSON: ") + e.what());
  }
  sem.validate();
  return sem;
}

inline Json to_json(const PrCurve& c) {
  return Json{{"recall", c.recall_grid}, {"precision", c.precision_at}};
}

inline Json to_json(const SelectionResult& s) {
  Json table = Json::array();
  for (const auto& g : s.criterion_table) {
    table.push_back(Json{{"eta", g.eta},
                         {"gamma", g.gamma},
                         {"score", g.failed ? Json(nullptr) : Json(g.score)},
                         {"failed", g.failed}});
  }
  return Json{{"method", to_string(s.method)},
              {"chosen_eta", s.chosen_eta},
              {"chosen_gamma", s.chosen_gamma},
              {"criterion_table", std::move(table)}};
}

inline Json to_json(const EffectSets& e) {
  Json pairs = Json::array();
  for (int x = 0; x < e.num_nodes(); ++x)
    for (int y = 0; y < e.num_nodes(); ++y)
      if (x != y) pairs.push_back(Json{{"x", x}, {"y", y}, {"effects", e.at(x, y)}, {"min_abs", e.min_abs(x, y)}});
  return Json{{"p", e.num_nodes()}, {"skipped", e.skipped}, {"pairs", std::move(pairs)}};
}

inline EffectSets effects_from_json(const Json& j) {
  try {
    EffectSets e(j.at("p").get<int>());
    e.skipped = j.value("skipped", 0);
    for (const auto& pr : j.at("pairs")) e.at(pr.at("x").get<int>(), pr.at("y").get<int>()) = pr.at("effects").get<std::vector<double>>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("effects JSON: ") + ex.what());
  } catch (const InvalidArgument& ex) {
    throw FormatError(std::string("effects JSON: ") + ex.what());
  }
}

/// One results record per (replicate, method).
inline Json results_json(const ReplicateResult& r, const std::string& method) {
  const MethodCurves& m = r.methods.at(method);
  auto curve = [](const std::optional<PrCurve>& c) { return c ? to_json(*c) : Json(nullptr); };
  Json params = Json::object();
  for (const auto& [k, v] : m.chosen_params) params[k] = v;
  return Json{{"design", to_json(r.design)},
              {"seed", r.design.seed},
              {"method", method},
              {"chosen_params", std::move(params)},
              {"metrics",
               {{"skeleton_pr_curve", curve(m.skeleton)},
                {"directed_pr_curve", curve(m.directed)},
                {"effect_pr_curve", curve(m.effect)}}},
              {"timings", {{"seconds", m.seconds}}}};
}

// ---------------------------------------------------------------------------
// Manifests

struct RunManifest {
  std::string command;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  Json config = Json::object();
  Json timings = Json::object();

  Json to_json() const {
    return Json{{"command", command}, {"version", version}, {"seed", seed},   {"inputs", inputs},
                {"outputs", outputs}, {"config", config},   {"timings", timings}};
  }

  void write(const std::filesystem::path& path) const { write_text_atomic(path, to_json().dump(2) + "\n"); }
};

}  // namespace lrpsges

#endif  // LRPSGES_IO_HPP
