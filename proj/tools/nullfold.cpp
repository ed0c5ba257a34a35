// nullfold: run a scenario file and write report.json plus series CSVs.
//
//   nullfold analyze|build|volumes|verify SCENARIO [--out DIR] [--tol NAME=VALUE]...
//            [--grid N] [--t-steps N] [--threads N] [--reproducible]
//
// Exit status: 0 all executed checks pass, 1 a check failed, 2 configuration
// error, 3 numerical failure (integration breakdown).

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nullfold/error.hpp"
#include "nullfold/parallel.hpp"
#include "nullfold/report.hpp"
#include "nullfold/scenario.hpp"
#include "nullfold/verification.hpp"

using namespace nullfold;

namespace {

enum Exit { kPass = 0, kCheckFailure = 1, kConfiguration = 2, kNumerical = 3 };

struct Flags {
  std::string scenario;
  std::string out = "out";
  std::vector<std::string> tol;
  int grid = 0;
  int t_steps = 0;
  int threads = 0;
  bool reproducible = false;
};

std::vector<Stage> stages_of(const std::string& command) {
  if (command == "analyze") return {Stage::Frames, Stage::Forms, Stage::Shear};
  if (command == "build") return {Stage::Hypersurface, Stage::Omega};
  if (command == "volumes") return {Stage::Volumes};
  return {Stage::Frames, Stage::Forms,  Stage::Shear,  Stage::Hypersurface,
          Stage::Omega,  Stage::Volumes, Stage::Jacobi, Stage::Invariance};
}

void apply_flags(Scenario& sc, const Flags& f) {
  for (const auto& item : f.tol) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::Configuration, "--tol expects NAME=VALUE, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    if (!find_check(name)) throw Error(ErrorKind::Configuration, "--tol: unknown check '" + name + "'");
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item.substr(eq + 1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() - eq - 1 || !(v >= 0))
      throw Error(ErrorKind::Configuration, "--tol: '" + item.substr(eq + 1) + "' is not a non-negative number");
    sc.tolerances[name] = v;
  }
  if (f.grid > 0)
    for (auto& c : sc.grid.counts) c = f.grid;
  if (f.t_steps > 0) sc.grid.t_steps = f.t_steps;
}

int run(const std::string& command, const Flags& f) {
  try {
    set_thread_count(f.threads);
    Scenario sc = load_scenario(f.scenario);
    apply_flags(sc, f);
    const auto stages = stages_of(command);
    std::vector<std::string> selected;
    if (sc.checks) {
      for (const auto& name : *sc.checks)
        for (Stage s : stages)
          if (find_check(name)->stage == s) selected.push_back(name);
    } else {
      selected = applicable_checks(sc, stages);
    }
    const CheckReport report = run_property_suite(sc, selected);
    EmitOptions eo;
    eo.reproducible = f.reproducible;
    eo.threads = thread_count();
    emit_report(report, f.out, eo);
    for (const auto& e : report.entries)
      std::printf("%-8s %-32s residual=%s tol=%s%s\n", status_name(e.status), e.check.c_str(),
                  format_number(e.residual).c_str(), format_number(e.tolerance).c_str(),
                  e.note.empty() ? "" : ("  (" + e.note + ")").c_str());
    if (report.numerical_failure) {
      std::fprintf(stderr, "nullfold: numerical failure while running %s\n", f.scenario.c_str());
      return kNumerical;
    }
    return report.all_pass() ? kPass : kCheckFailure;
  } catch (const Error& e) {
    std::fprintf(stderr, "nullfold: %s error: %s\n", error_kind_name(e.kind()), e.what());
    return e.is_configuration() ? kConfiguration : kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nullfold: %s\n", e.what());
    return kConfiguration;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lightlike hypersurface construction and verification"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const char* name : {"analyze", "build", "volumes", "verify"}) {
    static const std::map<std::string, std::string> help = {
        {"analyze", "extrinsic geometry of S: frames, forms, shear, rotation form"},
        {"build", "lightlike hypersurface, total umbilicity and the conformal factor"},
        {"volumes", "leaf volumes and their two predictions (volumes.csv)"},
        {"verify", "the full property suite"}};
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("scenario", flags.scenario, "scenario JSON file")->required();
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--tol", flags.tol, "tolerance override NAME=VALUE (repeatable)");
    sub->add_option("--grid", flags.grid, "nodes per chart parameter")->check(CLI::PositiveNumber);
    sub->add_option("--t-steps", flags.t_steps, "generator parameter steps")->check(CLI::PositiveNumber);
    sub->add_option("--threads", flags.threads, "worker threads (default NULLFOLD_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--reproducible", flags.reproducible, "omit the timestamp sidecar");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfiguration;
  }
  return run(chosen, flags);
}
