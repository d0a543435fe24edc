// main.cpp
// xcli: runs registered experiments, enumerations and fixture checks.
// Exit codes: 0 pass, 1 failed assertion or fixture mismatch, 2 usage error
// or missing fixture, 3 request beyond the enumeration limits.

#include "experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#ifndef QPERM_FIXTURES
#define QPERM_FIXTURES "fixtures/frozen.json"
#endif

using namespace qperm::xcli;

namespace {

constexpr int kPass = 0, kFail = 1, kUsage = 2, kLimit = 3;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Records or asserts an experiment's frozen quantities; returns an exit code.
int apply_fixtures(const ExperimentConfig& cfg, const Experiment& e, const ExperimentResult& r,
                   nlohmann::json& record) {
  if (cfg.fixtures == FixtureMode::Off || r.frozen.empty()) return kPass;
  FixtureStore store = FixtureStore::load(cfg.fixture_file);
  nlohmann::json report = nlohmann::json::array();
  int code = kPass;
  for (const auto& [name, value] : r.frozen) {
    const std::string key = fixture_key(cfg, e, name);
    if (cfg.fixtures == FixtureMode::Record) {
      const bool changed = store.record(key, value, 1e-9, build_git_ref(), cfg.force);
      report.push_back({{"key", key}, {"recorded", changed}});
    } else {
      const auto chk = store.check(key, value);
      report.push_back({{"key", key}, {"ok", chk.ok}, {"missing", chk.missing}, {"stored", chk.stored},
                        {"measured", chk.measured}});
      if (chk.missing)
        code = kUsage;
      else if (!chk.ok && code == kPass)
        code = kFail;
    }
  }
  if (cfg.fixtures == FixtureMode::Record) store.save(cfg.fixture_file);
  record["fixtures"] = report;
  return code;
}

int run(const ExperimentConfig& cfg) {
  const Experiment& e = find_experiment(cfg.experiment);
  validate(cfg, e);
  const ExperimentResult r = e.run(cfg);
  nlohmann::json record = result_record(cfg, e, r);
  int code = r.pass ? kPass : kFail;
  if (e.name == "frozen-suite" && r.values.value("missing", 0) > 0) code = kUsage;
  const int fixture_code = apply_fixtures(cfg, e, r, record);
  if (fixture_code != kPass && code == kPass) code = fixture_code;
  const std::string text = record.dump(2) + "\n";
  std::cout << text;
  if (!cfg.output.empty()) write_file(cfg.output, text);
  if (!cfg.csv.empty()) write_file(cfg.csv, r.csv);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale quantum permutation oracle experiments"};
  app.set_config("--config", "", "TOML/INI file with option values (command-line flags take precedence)");
  app.require_subcommand(1);

  ExperimentConfig cfg;
  cfg.fixture_file = QPERM_FIXTURES;
  std::uint64_t seed = 0;
  std::string fixtures = "off";
  app.add_option("-M", cfg.M, "domain size of the function oracle");
  app.add_option("-N", cfg.N, "range size (a power of two)");
  app.add_option("-n", cfg.n, "Feistel half-width in bits");
  app.add_option("-q", cfg.q, "number of queries");
  app.add_option("-l", cfg.l, "number of output pairs");
  app.add_option("-t", cfg.t, "database size bound");
  app.add_option("-x", cfg.x, "query point");
  app.add_option("--rounds", cfg.rounds, "Feistel rounds");
  app.add_option("--twirl", cfg.twirl, "uniform | feistel2-pair");
  app.add_option("--predicate", cfg.predicate, "search predicate name");
  app.add_option("--attack", cfg.attack, "distinguisher attack name");
  app.add_option("--variant", cfg.variant, "cycle-free | sparsity");
  app.add_option("--kind", cfg.kind, "function | injective");
  app.add_option("--pairs", cfg.pairs, "database as x:y,x:y");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
  app.add_option("--budget", cfg.budget, "Monte Carlo trials");
  app.add_option("--output", cfg.output, "also write the JSON record here");
  app.add_option("--csv", cfg.csv, "write CSV rows here");
  app.add_option("--fixtures", fixtures, "off | record | assert")
      ->check(CLI::IsMember({"off", "record", "assert"}));
  app.add_option("--fixture-file", cfg.fixture_file, "fixture store");
  app.add_flag("--force", cfg.force, "overwrite differing fixtures in record mode");

  std::string name;
  for (const char* kind : {"verify", "experiment", "enumerate"}) {
    auto* sub = app.add_subcommand(kind, std::string("run a registered ") + kind + " entry");
    sub->add_option("name", name, "entry name (see list-experiments)")->required();
    sub->fallthrough();
  }
  auto* crom = app.add_subcommand("cromulence", "check twirl cromulence conditions");
  crom->fallthrough();
  auto* dist = app.add_subcommand("distinguish", "run a small-round Feistel distinguisher");
  dist->fallthrough();
  bool as_json = false;
  auto* list = app.add_subcommand("list-experiments", "show the experiment catalog");
  list->add_flag("--json", as_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsage;
  }

  try {
    if (list->parsed()) {
      if (as_json) {
        std::cout << catalog_json().dump(2) << "\n";
      } else {
        for (const auto& e : catalog()) std::cout << e.kind << "\t" << e.name << "\t" << e.anchor << "\n";
      }
      return kPass;
    }
    if (seed_opt->count() > 0) cfg.seed = seed;
    static const std::map<std::string, FixtureMode> modes = {
        {"off", FixtureMode::Off}, {"record", FixtureMode::Record}, {"assert", FixtureMode::Assert}};
    cfg.fixtures = modes.at(fixtures);
    if (crom->parsed())
      cfg.experiment = "cromulence";
    else if (dist->parsed())
      cfg.experiment = "distinguish";
    else
      cfg.experiment = name;
    const std::string sub = app.get_subcommands().front()->get_name();
    if (find_experiment(cfg.experiment).kind != sub)
      throw std::invalid_argument("'" + cfg.experiment + "' is not a " + sub + " entry");
    return run(cfg);
  } catch (const std::length_error& e) {
    std::cerr << "limit: " << e.what() << "\n";
    return kLimit;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kFail;
  }
}
