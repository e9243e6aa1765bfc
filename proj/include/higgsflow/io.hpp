#pragma once
// Persistence: bundle-metric snapshots as flat binary little-endian complex
// doubles with a JSON sidecar describing the shapes, and a reader for the
// flow series CSV.  A snapshot written as PREFIX produces PREFIX.bin (the
// raw field data, site-major, row-major within each matrix) and PREFIX.json
// (grid, rank, step, time, seed, and scenario name).

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "higgsflow/flow.hpp"

namespace higgsflow {

static_assert(std::endian::native == std::endian::little,
              "snapshot files are defined little-endian; this platform is not");
static_assert(sizeof(cd) == 16, "complex<double> must be two packed doubles");

struct SnapshotMeta {
  int n = 0;
  int N = 0;
  int rank = 0;
  std::array<double, 4> periods{1.0, 1.0, 1.0, 1.0};
  int step = 0;
  double t = 0.0;
  double dt = 0.0;
  double mu = 0.0;
  double degree = 0.0;
  std::uint64_t seed = 0;
  std::string scenario;
};

inline void write_snapshot(const std::string& prefix, const SnapshotMeta& meta,
                           const MatrixField& H) {
  const Grid& g = H.grid();
  {
    std::ofstream bin(prefix + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin.good()) throw Error("snapshot: cannot write '" + prefix + ".bin'");
    bin.write(reinterpret_cast<const char*>(H.data().data()),
              static_cast<std::streamsize>(H.data().size() * sizeof(cd)));
    if (!bin.good()) throw Error("snapshot: short write to '" + prefix + ".bin'");
  }
  nlohmann::json j;
  j["layout"] = "complex128-le site-major row-major";
  j["n"] = meta.n;
  j["N"] = meta.N;
  j["rank"] = meta.rank;
  {
    std::vector<double> p(g.dims());
    for (int a = 0; a < g.dims(); ++a) p[a] = meta.periods[a];
    j["periods"] = p;
  }
  j["sites"] = g.sites();
  j["values"] = H.data().size();
  j["step"] = meta.step;
  j["t"] = meta.t;
  j["dt"] = meta.dt;
  j["mu"] = meta.mu;
  j["degree"] = meta.degree;
  j["seed"] = meta.seed;
  j["scenario"] = meta.scenario;
  std::ofstream side(prefix + ".json", std::ios::trunc);
  if (!side.good()) throw Error("snapshot: cannot write '" + prefix + ".json'");
  side << j.dump(2) << '\n';
}

struct LoadedSnapshot {
  SnapshotMeta meta;
  std::unique_ptr<Grid> grid;
  MatrixField H;
};

inline LoadedSnapshot read_snapshot(const std::string& prefix) {
  std::ifstream side(prefix + ".json");
  if (!side.good()) throw Error("snapshot: cannot open '" + prefix + ".json'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(side);
  } catch (const std::exception& e) {
    throw Error("snapshot: bad sidecar '" + prefix + ".json': " + e.what());
  }

  LoadedSnapshot out;
  try {
    out.meta.n = j.at("n").get<int>();
    out.meta.N = j.at("N").get<int>();
    out.meta.rank = j.at("rank").get<int>();
    auto p = j.at("periods").get<std::vector<double>>();
    for (std::size_t a = 0; a < p.size() && a < 4; ++a) out.meta.periods[a] = p[a];
    out.meta.step = j.at("step").get<int>();
    out.meta.t = j.at("t").get<double>();
    out.meta.dt = j.at("dt").get<double>();
    out.meta.mu = j.at("mu").get<double>();
    out.meta.degree = j.at("degree").get<double>();
    out.meta.seed = j.at("seed").get<std::uint64_t>();
    out.meta.scenario = j.at("scenario").get<std::string>();
  } catch (const std::exception& e) {
    throw Error("snapshot: sidecar '" + prefix + ".json' misses a field: " +
                e.what());
  }

  out.grid = std::make_unique<Grid>(out.meta.n, out.meta.N, out.meta.periods);
  out.H = MatrixField(*out.grid, out.meta.rank);

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin.good()) throw Error("snapshot: cannot open '" + prefix + ".bin'");
  const std::streamsize want =
      static_cast<std::streamsize>(out.H.data().size() * sizeof(cd));
  bin.read(reinterpret_cast<char*>(out.H.data().data()), want);
  if (bin.gcount() != want)
    throw Error("snapshot: '" + prefix + ".bin' has the wrong size");
  return out;
}

// Parse a series file written with write_flow_csv.  The step column is not
// stored in the file; rows come back with step = -1.
inline std::vector<FlowRecord> read_flow_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw Error("series: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kFlowCsvHeader)
    throw Error("series: '" + path + "' does not start with the expected header");

  std::vector<FlowRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FlowRecord r;
    r.step = -1;
    double* cols[9] = {&r.t,      &r.Y,      &r.M,
                       &r.sup_LF, &r.logdet_max, &r.eigmin,
                       &r.eigmax, &r.Dprime_norm, &r.trace_h_sup};
    std::size_t pos = 0;
    for (int k = 0; k < 9; ++k) {
      std::size_t next = line.find(',', pos);
      const std::string tok = line.substr(pos, next == std::string::npos
                                                   ? std::string::npos
                                                   : next - pos);
      try {
        *cols[k] = std::stod(tok);
      } catch (const std::exception&) {
        throw Error("series: bad value '" + tok + "' in '" + path + "'");
      }
      if (k < 8) {
        if (next == std::string::npos)
          throw Error("series: short row in '" + path + "'");
        pos = next + 1;
      }
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace higgsflow
