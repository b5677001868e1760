#pragma once

// Experiment harness behind the command-line tool: JSON configs, snapshot CSVs,
// dense and TT identification runs, and report tables.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ktt/amuset.hpp"
#include "ktt/dense_pipeline.hpp"
#include "ktt/dictionary.hpp"
#include "ktt/dynamics.hpp"
#include "ktt/errors.hpp"
#include "ktt/generator_io.hpp"
#include "ktt/generator_tt.hpp"

namespace ktt {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class Pipeline { dense, tt, both };

struct ExperimentConfig {
  std::string name = "experiment";
  std::string system;
  std::size_t dim = 0;
  std::vector<State> initial_conditions;
  double ts = 0.0;
  std::size_t pairs = 0;  // per trajectory
  std::size_t burn_in = 0;
  std::size_t degree = 2;
  double eps = 1.0 - 1e-6;
  Pipeline pipeline = Pipeline::tt;
  IntegratorOptions integrator;
  std::size_t report_max_degree = 0;  // 0 reports every dictionary entry
  std::uint64_t seed = 0;             // reserved

  MonomialDictionary dictionary() const { return MonomialDictionary(dim, degree); }
  bool runs_dense() const { return pipeline != Pipeline::tt; }
  bool runs_tt() const { return pipeline != Pipeline::dense; }

  void validate() const {
    if (initial_conditions.empty()) throw ValidationError("config needs at least one initial condition");
    for (const auto& x : initial_conditions) {
      if (static_cast<std::size_t>(x.size()) != dim) {
        throw ShapeError("initial condition has " + std::to_string(x.size()) + " components, expected " +
                         std::to_string(dim));
      }
      if (!x.allFinite()) throw ValidationError("initial condition is not finite");
    }
    if (!(ts > 0.0) || !std::isfinite(ts)) throw ValidationError("ts must be positive");
    if (pairs == 0) throw ValidationError("pairs must be positive");
    if (degree == 0) throw ValidationError("degree must be positive");
    if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("eps must lie in (0, 1]");
    if (!(integrator.rtol > 0.0) || !(integrator.atol > 0.0)) {
      throw ValidationError("integrator tolerances must be positive");
    }
    (void)make_system(system, dim);
    if (runs_dense() && dictionary().size() > kDenseDictionaryCap) {
      throw SizeError("dense pipeline needs (degree+1)^d <= " + std::to_string(kDenseDictionaryCap) +
                      ", got " + std::to_string(dictionary().size()));
    }
  }
};

inline std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::dense: return "dense";
    case Pipeline::tt: return "tt";
    case Pipeline::both: return "both";
  }
  return "tt";
}

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    c.system = j.at("system").get<std::string>();
    for (const auto& ic : j.at("initial_conditions")) {
      const auto v = ic.get<std::vector<double>>();
      c.initial_conditions.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    c.dim = j.contains("dim") ? j.at("dim").get<std::size_t>()
                              : (c.initial_conditions.empty() ? 0 : static_cast<std::size_t>(c.initial_conditions[0].size()));
    c.ts = j.at("ts").get<double>();
    c.pairs = j.at("pairs").get<std::size_t>();
    c.burn_in = j.value("burn_in", std::size_t{0});
    c.degree = j.value("degree", c.degree);
    c.eps = j.value("eps", c.eps);
    const std::string p = j.value("pipeline", std::string("tt"));
    if (p == "dense") c.pipeline = Pipeline::dense;
    else if (p == "tt") c.pipeline = Pipeline::tt;
    else if (p == "both") c.pipeline = Pipeline::both;
    else throw ValidationError("pipeline must be dense, tt or both");
    if (j.contains("integrator")) {
      const auto& in = j.at("integrator");
      c.integrator.rtol = in.value("rtol", c.integrator.rtol);
      c.integrator.atol = in.value("atol", c.integrator.atol);
    }
    c.report_max_degree = j.value("report_max_degree", std::size_t{0});
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Snapshot CSV: header x1..xd, then one state per row written with %.17g.

inline void write_states_csv(const std::string& path, const Eigen::MatrixXd& states) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  for (Eigen::Index k = 0; k < states.rows(); ++k) std::fprintf(f, "%sx%ld", k ? "," : "", static_cast<long>(k + 1));
  std::fputc('\n', f);
  for (Eigen::Index m = 0; m < states.cols(); ++m) {
    for (Eigen::Index k = 0; k < states.rows(); ++k) std::fprintf(f, "%s%.17g", k ? "," : "", states(k, m));
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw Error("failed to write " + path);
}

/// Returns a d x rows matrix.
inline Eigen::MatrixXd read_states_csv(const std::string& path, std::size_t dim) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(path + ": empty file");
  const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols != dim) {
    throw ShapeError(path + ": " + std::to_string(cols) + " columns, config dimension is " + std::to_string(dim));
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \r", used) != std::string::npos || !std::isfinite(v)) {
        throw ValidationError(path + ": bad number '" + cell + "' on data row " + std::to_string(rows + 1));
      }
      values.push_back(v);
      ++n;
    }
    if (n != dim) throw ShapeError(path + ": data row " + std::to_string(rows + 1) + " has " + std::to_string(n) + " values");
    ++rows;
  }
  return Eigen::Map<const Eigen::MatrixXd>(values.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows));
}

/// State matrix d x (burn_in + pairs + 1) for one initial condition.
inline Eigen::MatrixXd simulate_trajectory(const ExperimentConfig& cfg, std::size_t index) {
  const OdeSystem sys = make_system(cfg.system, cfg.dim);
  const std::size_t samples = cfg.burn_in + cfg.pairs + 1;
  const double t_end = static_cast<double>(samples - 1) * cfg.ts;
  try {
    const Trajectory traj = integrate(sys, cfg.initial_conditions.at(index), t_end, cfg.integrator);
    return sample_states(traj, cfg.ts, samples);
  } catch (const IntegrationError& e) {
    throw IntegrationError("trajectory " + std::to_string(index) + ": " + e.what(), e.last_good_time());
  }
}

inline std::string trajectory_file_name(const ExperimentConfig& cfg, std::size_t index) {
  return cfg.name + "_traj" + std::to_string(index) + ".csv";
}

inline std::vector<std::string> cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  for (std::size_t i = 0; i < cfg.initial_conditions.size(); ++i) {
    const std::string path = (fs::path(out_dir) / trajectory_file_name(cfg, i)).string();
    write_states_csv(path, simulate_trajectory(cfg, i));
    files.push_back(path);
  }
  return files;
}

/// Pairs from each trajectory are formed separately, so none straddles two files.
inline SnapshotSet snapshot_pairs(const ExperimentConfig& cfg, const std::vector<Eigen::MatrixXd>& states) {
  if (states.empty()) throw ValidationError("no snapshot data");
  std::vector<SnapshotSet> sets;
  for (const auto& s : states) sets.push_back(pairs_from_states(s, cfg.burn_in, cfg.pairs, cfg.ts));
  return concatenate(sets);
}

// ---------------------------------------------------------------------------
// Metrics

struct CoefficientEntry {
  std::size_t dimension = 0;  // zero-based output component
  std::vector<std::size_t> exponents;
  double estimate = 0.0;
  double truth = 0.0;
};

struct ErrorMetrics {
  double rmse = 0.0;
  double nrmse = 0.0;
  double w_bar = 0.0;  // mean |w| over nonzero true coefficients
};

/// RMSE over every listed coefficient; NRMSE divides by the mean |w| of the nonzero truths.
inline ErrorMetrics error_metrics(const std::vector<CoefficientEntry>& entries) {
  ErrorMetrics m;
  if (entries.empty()) return m;
  double se = 0.0, wsum = 0.0;
  std::size_t nonzero = 0;
  for (const auto& e : entries) {
    se += (e.estimate - e.truth) * (e.estimate - e.truth);
    if (e.truth != 0.0) {
      wsum += std::abs(e.truth);
      ++nonzero;
    }
  }
  m.rmse = std::sqrt(se / static_cast<double>(entries.size()));
  m.w_bar = nonzero ? wsum / static_cast<double>(nonzero) : 0.0;
  m.nrmse = nonzero ? m.rmse / m.w_bar : std::numeric_limits<double>::quiet_NaN();
  return m;
}

inline std::vector<std::vector<std::size_t>> report_monomials(const ExperimentConfig& cfg) {
  const MonomialDictionary dict = cfg.dictionary();
  const std::size_t cap = cfg.report_max_degree == 0 ? dict.dim() * dict.degree() : cfg.report_max_degree;
  return dict.monomials_up_to(cap);
}

inline json eigen_summary(const Eigen::VectorXcd& lambdas) {
  json s;
  s["count"] = lambdas.size();
  if (lambdas.size() > 0) {
    s["max_modulus"] = lambdas.cwiseAbs().maxCoeff();
    s["min_modulus"] = lambdas.cwiseAbs().minCoeff();
  }
  json lead = json::array();
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(lambdas.size(), 10); ++i)
    lead.push_back({lambdas(i).real(), lambdas(i).imag()});
  s["leading"] = lead;
  return s;
}

inline void write_eigenvalues_csv(const std::string& path, const Eigen::VectorXcd& lambdas) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  std::fprintf(f, "index,re,im,modulus\n");
  for (Eigen::Index i = 0; i < lambdas.size(); ++i)
    std::fprintf(f, "%ld,%.17g,%.17g,%.17g\n", static_cast<long>(i), lambdas(i).real(), lambdas(i).imag(),
                 std::abs(lambdas(i)));
  std::fclose(f);
}

inline json coefficients_json(const std::vector<CoefficientEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"dimension", e.dimension + 1},
                   {"monomial", MonomialDictionary::label(e.exponents)},
                   {"exponents", e.exponents},
                   {"estimate", e.estimate},
                   {"true", e.truth},
                   {"abs_error", std::abs(e.estimate - e.truth)}});
  }
  return arr;
}

inline json pipeline_json(const std::vector<CoefficientEntry>& entries, const std::vector<std::string>& warnings) {
  const ErrorMetrics m = error_metrics(entries);
  json p;
  p["rmse"] = m.rmse;
  p["nrmse"] = m.nrmse;
  p["w_bar"] = m.w_bar;
  p["coefficients"] = coefficients_json(entries);
  p["warnings"] = warnings;
  return p;
}

struct IdentifyResult {
  json report;
  std::optional<DenseGenerator> dense;
  Eigen::VectorXcd dense_lambdas;  // eigenvalues of K, sorted
  std::optional<GeneratorTT> tt;
};

/// Runs the configured pipelines on pooled snapshot pairs.
inline IdentifyResult identify(const ExperimentConfig& cfg, const SnapshotSet& data) {
  data.validate();
  if (data.dim() != cfg.dim) throw ShapeError("snapshot dimension does not match the config");
  const MonomialDictionary dict = cfg.dictionary();
  const TrueCoefficients truth = true_coefficients(cfg.system, dict);
  const auto monomials = report_monomials(cfg);

  IdentifyResult out;
  json& r = out.report;
  r["name"] = cfg.name;
  r["system"] = cfg.system;
  r["dim"] = cfg.dim;
  r["degree"] = cfg.degree;
  r["dictionary_size"] = dict.size();
  r["ts"] = cfg.ts;
  r["eps"] = cfg.eps;
  r["pairs"] = data.pairs();
  r["pipeline"] = to_string(cfg.pipeline);
  r["report_max_degree"] = cfg.report_max_degree;
  r["dense_element_count"] = detail::checked_product(dict.size(), dict.size());

  std::vector<CoefficientEntry> dense_entries, tt_entries;
  if (cfg.runs_dense()) {
    const KoopmanMatrix km = edmd(data, dict);
    DenseGenerator g = matrix_log_generator(km);
    for (std::size_t k = 0; k < cfg.dim; ++k) {
      const Eigen::VectorXd row = extract_row(g, k);
      for (const auto& e : monomials)
        dense_entries.push_back({k, e, row(static_cast<Eigen::Index>(dict.flat_index(e))), truth.value(k, e)});
    }
    json p = pipeline_json(dense_entries, g.warnings);
    p["element_count"] = static_cast<std::size_t>(g.L.size());
    p["effective_rank"] = km.effective_rank;
    Eigen::EigenSolver<Eigen::MatrixXd> es(km.K, false);
    Eigen::VectorXcd lam = es.eigenvalues();
    Eigen::MatrixXcd no_vectors(0, lam.size());
    sort_eigenpairs(lam, no_vectors);
    p["eigenvalues"] = eigen_summary(lam);
    p["imag_residual"] = g.imag_residual;
    r["dense"] = p;
    out.dense = std::move(g);
    out.dense_lambdas = std::move(lam);
  }
  if (cfg.runs_tt()) {
    const EigenSolution sol = amuset(data.X, data.Y, dict, cfg.eps);
    GeneratorTT g = assemble_generator(sol, dict, cfg.ts);
    double max_imag = 0.0;
    for (std::size_t k = 0; k < cfg.dim; ++k) {
      for (const auto& e : monomials) {
        const Coefficient c = coefficient(g, k, e);
        max_imag = std::max(max_imag, std::abs(c.imag));
        tt_entries.push_back({k, e, c.value, truth.value(k, e)});
      }
    }
    if (max_imag > kImagTolerance) {
      g.warnings.push_back("reported coefficients carry imaginary parts up to " + std::to_string(max_imag));
    }
    json p = pipeline_json(tt_entries, g.warnings);
    p["element_count"] = g.element_count;
    p["rank"] = g.rank();
    p["basis_ranks"] = g.basis.ranks();
    p["max_imag"] = max_imag;
    p["eigenvalues"] = eigen_summary(g.lambdas);
    r["tt"] = p;
    out.tt = std::move(g);
  }
  if (cfg.pipeline == Pipeline::both) {
    double diff = 0.0;
    for (std::size_t i = 0; i < tt_entries.size(); ++i)
      diff = std::max(diff, std::abs(tt_entries[i].estimate - dense_entries[i].estimate));
    r["dense_vs_tt_max_abs"] = diff;
  }
  return out;
}

inline void write_dense_generator_csv(const std::string& path, const DenseGenerator& g) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  std::fprintf(f, "monomial");
  for (std::size_t j = 0; j < g.dict.size(); ++j) std::fprintf(f, ",%s", g.dict.label(j).c_str());
  std::fputc('\n', f);
  for (Eigen::Index i = 0; i < g.L.rows(); ++i) {
    std::fprintf(f, "%s", g.dict.label(static_cast<std::size_t>(i)).c_str());
    for (Eigen::Index j = 0; j < g.L.cols(); ++j) std::fprintf(f, ",%.17g", g.L(i, j));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

/// Writes report.json, eigenvalue CSVs, the dense generator CSV and the TT generator file.
inline json cmd_identify(const ExperimentConfig& cfg, const std::vector<std::string>& data_files,
                         const std::string& out_dir) {
  if (data_files.empty()) throw ValidationError("identify needs at least one data file");
  std::vector<Eigen::MatrixXd> states;
  for (const auto& f : data_files) states.push_back(read_states_csv(f, cfg.dim));
  IdentifyResult res = identify(cfg, snapshot_pairs(cfg, states));

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  if (res.dense) {
    write_dense_generator_csv((dir / "generator_dense.csv").string(), *res.dense);
    write_eigenvalues_csv((dir / "eigenvalues_dense.csv").string(), res.dense_lambdas);
  }
  if (res.tt) {
    save_generator((dir / "generator_tt.kgn").string(), *res.tt, cfg.eps);
    write_eigenvalues_csv((dir / "eigenvalues_tt.csv").string(), res.tt->lambdas);
  }
  write_json_file((dir / "report.json").string(), res.report);
  return res.report;
}

// ---------------------------------------------------------------------------
// Report tables

inline std::vector<CoefficientEntry> entries_from_report(const json& pipeline, std::size_t max_degree) {
  std::vector<CoefficientEntry> out;
  for (const auto& c : pipeline.at("coefficients")) {
    CoefficientEntry e;
    e.dimension = c.at("dimension").get<std::size_t>() - 1;
    e.exponents = c.at("exponents").get<std::vector<std::size_t>>();
    e.estimate = c.at("estimate").get<double>();
    e.truth = c.at("true").get<double>();
    std::size_t total = 0;
    for (auto p : e.exponents) total += p;
    if (total <= max_degree) out.push_back(std::move(e));
  }
  return out;
}

namespace detail {

struct CsvFile {
  std::FILE* f = nullptr;
  explicit CsvFile(const fs::path& p) : f(std::fopen(p.string().c_str(), "w")) {
    if (!f) throw ValidationError("cannot open " + p.string() + " for writing");
  }
  ~CsvFile() { std::fclose(f); }
  CsvFile(const CsvFile&) = delete;
  CsvFile& operator=(const CsvFile&) = delete;
};

inline std::vector<std::size_t> pair_exponents(std::size_t d, std::size_t a, std::size_t b) {
  std::vector<std::size_t> e(d, 0);
  ++e[a];
  ++e[b];
  return e;
}

inline void write_table(const fs::path& path, const std::vector<const CoefficientEntry*>& rows) {
  CsvFile out(path);
  std::fprintf(out.f, "dimension,term,estimate,true,abs_error\n");
  for (const auto* e : rows)
    std::fprintf(out.f, "%zu,%s,%.17g,%.17g,%.17g\n", e->dimension + 1, MonomialDictionary::label(e->exponents).c_str(),
                 e->estimate, e->truth, std::abs(e->estimate - e->truth));
}

}  // namespace detail

/// Emits per-pipeline coefficient CSVs, nonzero/zero term tables and per-dimension series.
///
/// For lorenz96 the nonzero table lists x_{i+1} x_{i-1} in row i and the zero table
/// lists x_i x_{i+1}; other systems split the filtered entries by their true value.
inline std::vector<std::string> cmd_report(const json& report, std::size_t max_degree, const std::string& out_dir) {
  std::vector<std::string> files;
  std::string system;
  std::size_t d = 0, degree = 0;
  try {
    system = report.at("system").get<std::string>();
    d = report.at("dim").get<std::size_t>();
    degree = report.at("degree").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad report: ") + e.what());
  }
  const MonomialDictionary dict(d, degree);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  for (const char* name : {"dense", "tt"}) {
    if (!report.contains(name)) continue;
    std::vector<CoefficientEntry> entries;
    try {
      entries = entries_from_report(report.at(name), max_degree);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad report coefficients: ") + e.what());
    }
    const std::string tag = name;

    {
      const fs::path p = dir / ("coefficients_" + tag + ".csv");
      detail::CsvFile out(p);
      std::fprintf(out.f, "dimension,monomial,estimate,true,abs_error\n");
      for (const auto& e : entries)
        std::fprintf(out.f, "%zu,%s,%.17g,%.17g,%.17g\n", e.dimension + 1, MonomialDictionary::label(e.exponents).c_str(),
                     e.estimate, e.truth, std::abs(e.estimate - e.truth));
      files.push_back(p.string());
    }

    std::vector<const CoefficientEntry*> nonzero, zero;
    if (system == "lorenz96") {
      for (std::size_t i = 0; i < d; ++i) {
        const auto want_nz = detail::pair_exponents(d, (i + 1) % d, (i + d - 1) % d);
        const auto want_z = detail::pair_exponents(d, i, (i + 1) % d);
        for (const auto& e : entries) {
          if (e.dimension != i) continue;
          if (e.exponents == want_nz) nonzero.push_back(&e);
          if (e.exponents == want_z) zero.push_back(&e);
        }
      }
    } else {
      for (const auto& e : entries) (e.truth != 0.0 ? nonzero : zero).push_back(&e);
    }
    const fs::path pn = dir / ("table_nonzero_" + tag + ".csv");
    const fs::path pz = dir / ("table_zero_" + tag + ".csv");
    detail::write_table(pn, nonzero);
    detail::write_table(pz, zero);
    files.push_back(pn.string());
    files.push_back(pz.string());

    for (std::size_t k = 0; k < d; ++k) {
      const fs::path p = dir / ("series_" + tag + "_dim" + std::to_string(k + 1) + ".csv");
      detail::CsvFile out(p);
      std::fprintf(out.f, "index,true,estimated\n");
      for (const auto& e : entries)
        if (e.dimension == k) std::fprintf(out.f, "%zu,%.17g,%.17g\n", dict.flat_index(e.exponents), e.truth, e.estimate);
      files.push_back(p.string());
    }
  }
  return files;
}

}  // namespace ktt
