#pragma once
// JSON run configuration: a single document describing the grid, the base
// metric, the twisted Higgs bundle, the initial bundle metric, the flow
// parameters, and the blow-up analysis settings.  Parsing is strict: every
// violation names the offending field by its dotted path, and unknown keys
// are rejected so typos cannot silently fall back to defaults.

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "higgsflow/expr.hpp"
#include "higgsflow/flow.hpp"

namespace higgsflow {

struct GridConfig {
  int n = 1;
  int N = 16;
  std::array<double, 4> periods{1.0, 1.0, 1.0, 1.0};
};

struct MetricConfig {
  std::string type = "flat";  // flat | kaehler_perturbed | nonkaehler
  double amplitude = 0.0;
  std::array<int, 4> mode{1, 0, 0, 0};
  bool gauduchon_gauge = false;
};

struct HiggsComponentConfig {
  int axis = 0;
  std::vector<std::vector<std::string>> entries;  // rank x rank formulas
};

struct BundleConfig {
  int rank = 1;
  std::vector<std::array<int, 2>> twists;  // one entry per factor, n integers
  std::vector<HiggsComponentConfig> higgs;
};

struct InitialMetricConfig {
  // identity | conformal_exp | diagonal_exp | hermitian_exp | random_exp
  std::string type = "identity";
  std::string formula;                             // conformal_exp
  std::vector<std::vector<std::string>> entries;   // diagonal_exp / hermitian_exp
  double amplitude = 0.0;                          // random_exp
  int max_mode = 1;                                // random_exp band limit
  bool det_gauge = false;
};

struct StabilityConfig {
  std::vector<double> sigmas{0.5, 0.2, 0.1, 0.05};
  double slope_tol = 1e-6;
  double residual_gate = 1e-2;
};

struct RunConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  GridConfig grid;
  MetricConfig metric;
  BundleConfig bundle;
  InitialMetricConfig initial_metric;
  FlowConfig flow;
  StabilityConfig stability;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& path, const std::string& why) {
  throw Error("config: " + path + ": " + why);
}

inline const json& need_object(const json& j, const std::string& path) {
  if (!j.is_object()) config_fail(path, "expected an object");
  return j;
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) config_fail(path.empty() ? it.key() : path + "." + it.key(),
                         "unknown field");
  }
}

inline bool has(const json& obj, const char* key) { return obj.contains(key); }

inline std::string get_string(const json& obj, const std::string& path,
                              const char* key) {
  if (!has(obj, key)) config_fail(path + key, "missing required field");
  const json& v = obj.at(key);
  if (!v.is_string()) config_fail(path + key, "expected a string");
  return v.get<std::string>();
}

inline double get_double(const json& v, const std::string& path) {
  if (!v.is_number()) config_fail(path, "expected a number");
  return v.get<double>();
}

inline int get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) config_fail(path, "expected an integer");
  return v.get<int>();
}

inline bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) config_fail(path, "expected a boolean");
  return v.get<bool>();
}

// Validate a formula string by parsing it; rethrow with the field path.
inline void check_formula(const std::string& src, int dims, const std::string& path) {
  try {
    parse_expression(src, dims);
  } catch (const Error& e) {
    config_fail(path, e.what());
  }
}

inline GridConfig parse_grid(const json& j) {
  const json& o = need_object(j, "grid");
  check_keys(o, "grid", {"n", "N", "periods"});
  GridConfig g;
  if (!has(o, "n")) config_fail("grid.n", "missing required field");
  g.n = get_int(o.at("n"), "grid.n");
  if (g.n != 1 && g.n != 2) config_fail("grid.n", "complex dimension must be 1 or 2");
  if (!has(o, "N")) config_fail("grid.N", "missing required field");
  g.N = get_int(o.at("N"), "grid.N");
  if (g.N < 8 || g.N % 2 != 0)
    config_fail("grid.N", "sites per axis must be even and at least 8");
  if (has(o, "periods")) {
    const json& p = o.at("periods");
    if (!p.is_array() || static_cast<int>(p.size()) != 2 * g.n)
      config_fail("grid.periods", "expected an array of 2n positive lengths");
    for (int a = 0; a < 2 * g.n; ++a) {
      g.periods[a] = get_double(p[a], "grid.periods[" + std::to_string(a) + "]");
      if (g.periods[a] <= 0.0)
        config_fail("grid.periods[" + std::to_string(a) + "]", "must be positive");
    }
  }
  return g;
}

inline MetricConfig parse_metric(const json& j, const GridConfig& g) {
  const json& o = need_object(j, "metric");
  check_keys(o, "metric", {"type", "amplitude", "mode", "gauduchon_gauge"});
  MetricConfig m;
  if (has(o, "type")) {
    if (!o.at("type").is_string()) config_fail("metric.type", "expected a string");
    m.type = o.at("type").get<std::string>();
  }
  if (m.type != "flat" && m.type != "kaehler_perturbed" && m.type != "nonkaehler")
    config_fail("metric.type",
                "expected flat, kaehler_perturbed, or nonkaehler; got '" + m.type + "'");
  if (m.type == "nonkaehler" && g.n != 2)
    config_fail("metric.type", "'nonkaehler' requires a surface grid (n = 2)");
  if (has(o, "amplitude")) {
    m.amplitude = get_double(o.at("amplitude"), "metric.amplitude");
    if (m.amplitude < 0.0) config_fail("metric.amplitude", "must be nonnegative");
  }
  if (has(o, "mode")) {
    const json& mm = o.at("mode");
    if (!mm.is_array() || static_cast<int>(mm.size()) != 2 * g.n)
      config_fail("metric.mode", "expected an array of 2n integers");
    for (int a = 0; a < 2 * g.n; ++a)
      m.mode[a] = get_int(mm[a], "metric.mode[" + std::to_string(a) + "]");
  }
  if (has(o, "gauduchon_gauge"))
    m.gauduchon_gauge = get_bool(o.at("gauduchon_gauge"), "metric.gauduchon_gauge");
  if (m.type != "flat" && m.amplitude == 0.0)
    config_fail("metric.amplitude", "perturbed metrics need a positive amplitude");
  return m;
}

inline BundleConfig parse_bundle(const json& j, const GridConfig& g) {
  const json& o = need_object(j, "bundle");
  check_keys(o, "bundle", {"rank", "twists", "higgs"});
  BundleConfig b;
  if (!has(o, "rank")) config_fail("bundle.rank", "missing required field");
  b.rank = get_int(o.at("rank"), "bundle.rank");
  if (b.rank < 1) config_fail("bundle.rank", "must be a positive integer");

  if (!has(o, "twists")) config_fail("bundle.twists", "missing required field");
  const json& tw = o.at("twists");
  if (!tw.is_array() || static_cast<int>(tw.size()) != b.rank)
    config_fail("bundle.twists", "expected one integer tuple per factor");
  for (int i = 0; i < b.rank; ++i) {
    const std::string path = "bundle.twists[" + std::to_string(i) + "]";
    const json& row = tw[i];
    if (!row.is_array() || static_cast<int>(row.size()) != g.n)
      config_fail(path, "expected " + std::to_string(g.n) + " integers (one per complex axis)");
    std::array<int, 2> t{0, 0};
    for (int a = 0; a < g.n; ++a)
      t[a] = get_int(row[a], path + "[" + std::to_string(a) + "]");
    b.twists.push_back(t);
  }

  if (has(o, "higgs")) {
    const json& hg = o.at("higgs");
    if (!hg.is_array()) config_fail("bundle.higgs", "expected an array of components");
    for (std::size_t k = 0; k < hg.size(); ++k) {
      const std::string path = "bundle.higgs[" + std::to_string(k) + "]";
      const json& comp = need_object(hg[k], path);
      check_keys(comp, path, {"axis", "entries"});
      HiggsComponentConfig hc;
      if (!has(comp, "axis")) config_fail(path + ".axis", "missing required field");
      hc.axis = get_int(comp.at("axis"), path + ".axis");
      if (hc.axis < 0 || hc.axis >= g.n)
        config_fail(path + ".axis", "complex axis out of range");
      for (const auto& other : b.higgs)
        if (other.axis == hc.axis) config_fail(path + ".axis", "duplicate axis");
      if (!has(comp, "entries")) config_fail(path + ".entries", "missing required field");
      const json& ent = comp.at("entries");
      if (!ent.is_array() || static_cast<int>(ent.size()) != b.rank)
        config_fail(path + ".entries", "expected a rank x rank matrix of formulas");
      for (int i = 0; i < b.rank; ++i) {
        const json& row = ent[i];
        if (!row.is_array() || static_cast<int>(row.size()) != b.rank)
          config_fail(path + ".entries", "expected a rank x rank matrix of formulas");
        std::vector<std::string> r;
        for (int jj = 0; jj < b.rank; ++jj) {
          const std::string epath = path + ".entries[" + std::to_string(i) + "][" +
                                    std::to_string(jj) + "]";
          if (!row[jj].is_string()) config_fail(epath, "expected a formula string");
          std::string src = row[jj].get<std::string>();
          check_formula(src, 2 * g.n, epath);
          r.push_back(std::move(src));
        }
        hc.entries.push_back(std::move(r));
      }
      b.higgs.push_back(std::move(hc));
    }
  }
  return b;
}

inline InitialMetricConfig parse_initial_metric(const json& j, const GridConfig& g,
                                                int rank) {
  const json& o = need_object(j, "initial_metric");
  check_keys(o, "initial_metric",
             {"type", "formula", "entries", "amplitude", "max_mode", "det_gauge"});
  InitialMetricConfig m;
  if (has(o, "type")) {
    if (!o.at("type").is_string()) config_fail("initial_metric.type", "expected a string");
    m.type = o.at("type").get<std::string>();
  }
  const bool known = m.type == "identity" || m.type == "conformal_exp" ||
                     m.type == "diagonal_exp" || m.type == "hermitian_exp" ||
                     m.type == "random_exp";
  if (!known)
    config_fail("initial_metric.type",
                "expected identity, conformal_exp, diagonal_exp, hermitian_exp, "
                "or random_exp; got '" + m.type + "'");

  if (m.type == "conformal_exp") {
    if (!has(o, "formula"))
      config_fail("initial_metric.formula", "missing required field");
    if (!o.at("formula").is_string())
      config_fail("initial_metric.formula", "expected a formula string");
    m.formula = o.at("formula").get<std::string>();
    check_formula(m.formula, 2 * g.n, "initial_metric.formula");
  }
  if (m.type == "diagonal_exp" || m.type == "hermitian_exp") {
    if (!has(o, "entries"))
      config_fail("initial_metric.entries", "missing required field");
    const json& ent = o.at("entries");
    const int rows = m.type == "diagonal_exp" ? 1 : rank;
    if (!ent.is_array() || static_cast<int>(ent.size()) != rows)
      config_fail("initial_metric.entries",
                  m.type == "diagonal_exp"
                      ? "expected a single row of rank diagonal formulas"
                      : "expected a rank x rank matrix of formulas");
    for (int i = 0; i < rows; ++i) {
      const json& row = ent[i];
      if (!row.is_array() || static_cast<int>(row.size()) != rank)
        config_fail("initial_metric.entries", "expected rank formulas per row");
      std::vector<std::string> r;
      for (int jj = 0; jj < rank; ++jj) {
        const std::string epath = "initial_metric.entries[" + std::to_string(i) +
                                  "][" + std::to_string(jj) + "]";
        if (!row[jj].is_string()) config_fail(epath, "expected a formula string");
        std::string src = row[jj].get<std::string>();
        check_formula(src, 2 * g.n, epath);
        r.push_back(std::move(src));
      }
      m.entries.push_back(std::move(r));
    }
  }
  if (has(o, "amplitude")) {
    m.amplitude = get_double(o.at("amplitude"), "initial_metric.amplitude");
    if (m.amplitude < 0.0) config_fail("initial_metric.amplitude", "must be nonnegative");
  }
  if (m.type == "random_exp" && m.amplitude == 0.0)
    config_fail("initial_metric.amplitude", "random starts need a positive amplitude");
  if (has(o, "max_mode")) {
    m.max_mode = get_int(o.at("max_mode"), "initial_metric.max_mode");
    if (m.max_mode < 1) config_fail("initial_metric.max_mode", "must be at least 1");
  }
  if (has(o, "det_gauge"))
    m.det_gauge = get_bool(o.at("det_gauge"), "initial_metric.det_gauge");
  return m;
}

inline FlowConfig parse_flow(const json& j) {
  const json& o = need_object(j, "flow");
  check_keys(o, "flow",
             {"dt", "max_steps", "stop_Y", "blowup_threshold", "record_every",
              "max_halvings", "quad_nodes", "track_functional", "renormalize_det",
              "sample_capacity"});
  FlowConfig f;
  if (has(o, "dt")) f.dt = get_double(o.at("dt"), "flow.dt");
  if (has(o, "max_steps")) {
    f.max_steps = get_int(o.at("max_steps"), "flow.max_steps");
    if (f.max_steps < 0) config_fail("flow.max_steps", "must be nonnegative");
  }
  if (has(o, "stop_Y")) {
    f.stop_Y = get_double(o.at("stop_Y"), "flow.stop_Y");
    if (f.stop_Y <= 0.0) config_fail("flow.stop_Y", "must be positive");
  }
  if (has(o, "blowup_threshold")) {
    f.blowup_threshold = get_double(o.at("blowup_threshold"), "flow.blowup_threshold");
    if (f.blowup_threshold < 0.0)
      config_fail("flow.blowup_threshold", "must be nonnegative (0 = default)");
  }
  if (has(o, "record_every")) {
    f.record_every = get_int(o.at("record_every"), "flow.record_every");
    if (f.record_every < 1) config_fail("flow.record_every", "must be at least 1");
  }
  if (has(o, "max_halvings")) {
    f.max_halvings = get_int(o.at("max_halvings"), "flow.max_halvings");
    if (f.max_halvings < 0) config_fail("flow.max_halvings", "must be nonnegative");
  }
  if (has(o, "quad_nodes")) {
    f.quad_nodes = get_int(o.at("quad_nodes"), "flow.quad_nodes");
    if (f.quad_nodes < 2) config_fail("flow.quad_nodes", "must be at least 2");
  }
  if (has(o, "track_functional"))
    f.track_functional = get_bool(o.at("track_functional"), "flow.track_functional");
  if (has(o, "renormalize_det"))
    f.renormalize_det = get_bool(o.at("renormalize_det"), "flow.renormalize_det");
  if (has(o, "sample_capacity")) {
    f.sample_capacity = get_int(o.at("sample_capacity"), "flow.sample_capacity");
    if (f.sample_capacity < 2) config_fail("flow.sample_capacity", "must be at least 2");
  }
  return f;
}

inline StabilityConfig parse_stability(const json& j) {
  const json& o = need_object(j, "stability");
  check_keys(o, "stability", {"sigmas", "slope_tol", "residual_gate"});
  StabilityConfig s;
  if (has(o, "sigmas")) {
    const json& sg = o.at("sigmas");
    if (!sg.is_array() || sg.empty())
      config_fail("stability.sigmas", "expected a nonempty array of exponents");
    s.sigmas.clear();
    for (std::size_t k = 0; k < sg.size(); ++k) {
      const std::string path = "stability.sigmas[" + std::to_string(k) + "]";
      double v = get_double(sg[k], path);
      if (!(v > 0.0 && v <= 1.0)) config_fail(path, "exponents must lie in (0, 1]");
      s.sigmas.push_back(v);
    }
  }
  if (has(o, "slope_tol")) {
    s.slope_tol = get_double(o.at("slope_tol"), "stability.slope_tol");
    if (s.slope_tol <= 0.0) config_fail("stability.slope_tol", "must be positive");
  }
  if (has(o, "residual_gate")) {
    s.residual_gate = get_double(o.at("residual_gate"), "stability.residual_gate");
    if (s.residual_gate <= 0.0)
      config_fail("stability.residual_gate", "must be positive");
  }
  return s;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::config_fail;
  if (!j.is_object()) config_fail("(document)", "expected a JSON object");
  detail::check_keys(j, "", {"scenario", "seed", "out_dir", "grid", "metric",
                             "bundle", "initial_metric", "flow", "stability"});
  RunConfig c;
  if (!j.contains("scenario")) config_fail("scenario", "missing required field");
  if (!j.at("scenario").is_string()) config_fail("scenario", "expected a string");
  c.scenario = j.at("scenario").get<std::string>();
  if (c.scenario.empty()) config_fail("scenario", "must be nonempty");

  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !v.is_number_integer())
      config_fail("seed", "expected a nonnegative integer");
    if (v.is_number_integer() && v.get<long long>() < 0)
      config_fail("seed", "expected a nonnegative integer");
    c.seed = v.get<std::uint64_t>();
  }
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) config_fail("out_dir", "expected a string");
    c.out_dir = j.at("out_dir").get<std::string>();
  }

  if (!j.contains("grid")) config_fail("grid", "missing required section");
  c.grid = detail::parse_grid(j.at("grid"));
  if (j.contains("metric")) c.metric = detail::parse_metric(j.at("metric"), c.grid);
  if (!j.contains("bundle")) config_fail("bundle", "missing required section");
  c.bundle = detail::parse_bundle(j.at("bundle"), c.grid);
  if (j.contains("initial_metric"))
    c.initial_metric =
        detail::parse_initial_metric(j.at("initial_metric"), c.grid, c.bundle.rank);
  if (j.contains("flow")) c.flow = detail::parse_flow(j.at("flow"));
  if (j.contains("stability")) c.stability = detail::parse_stability(j.at("stability"));
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw Error("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw Error("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace higgsflow
