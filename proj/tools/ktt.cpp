// ktt: simulate trajectories, identify vector fields, and tabulate reports.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 anything else.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ktt/harness.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int run(int argc, char** argv) {
  CLI::App app{"Koopman generator identification in tensor-train format"};
  app.require_subcommand(1);

  std::string config, out, in;
  std::vector<std::string> data;
  std::size_t max_degree = 2;

  auto* sim = app.add_subcommand("simulate", "integrate the configured system and write snapshot CSVs");
  sim->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "output directory")->required();

  auto* idf = app.add_subcommand("identify", "identify the generator from snapshot CSVs");
  idf->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
  idf->add_option("--data", data, "snapshot CSV files, one per trajectory")->required()->check(CLI::ExistingFile);
  idf->add_option("--out", out, "output directory")->required();

  auto* rep = app.add_subcommand("report", "write coefficient tables from a report JSON");
  rep->add_option("--in", in, "report JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--max-degree", max_degree, "largest total degree to tabulate");
  rep->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (*sim) {
    const auto cfg = ktt::load_config(config);
    for (const auto& f : ktt::cmd_simulate(cfg, out)) std::printf("%s\n", f.c_str());
  } else if (*idf) {
    const auto cfg = ktt::load_config(config);
    const auto report = ktt::cmd_identify(cfg, data, out);
    for (const char* p : {"dense", "tt"}) {
      if (!report.contains(p)) continue;
      const auto& r = report.at(p);
      std::printf("%-5s rmse %.3e  nrmse %.3e  elements %zu\n", p, r.at("rmse").get<double>(),
                  r.at("nrmse").get<double>(), r.at("element_count").get<std::size_t>());
      for (const auto& w : r.at("warnings")) std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
    }
    if (report.contains("dense_vs_tt_max_abs"))
      std::printf("dense vs tt max abs %.3e\n", report.at("dense_vs_tt_max_abs").get<double>());
  } else if (*rep) {
    for (const auto& f : ktt::cmd_report(ktt::read_json_file(in), max_degree, out)) std::printf("%s\n", f.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ktt::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const ktt::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
