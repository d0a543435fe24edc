// experiments.hpp
// Registered experiments: configuration, results, the catalog and the
// frozen regression suite shared by the CLI and the acceptance checks.

#pragma once

#include "fixtures.hpp"
#include "qperm/games.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qperm::xcli {

enum class FixtureMode { Off, Record, Assert };

struct ExperimentConfig {
  std::string experiment;
  Index M = 4, N = 4;
  unsigned n = 1;
  std::size_t q = 2, l = 1;
  Index t = 2;
  unsigned rounds = 7;
  Index x = 0;
  std::string twirl = "uniform";
  std::string predicate = "single-pair";
  std::string attack = "xor-statistic";
  std::string variant = "cycle-free";
  std::string kind = "injective";
  std::string pairs;  // database as "x:y,x:y"
  std::optional<std::uint64_t> seed;
  std::size_t budget = 100000;
  std::string output, csv;
  FixtureMode fixtures = FixtureMode::Off;
  std::string fixture_file;
  bool force = false;

  std::uint64_t seed_or_zero() const { return seed.value_or(0); }
};

struct ExperimentResult {
  bool pass = true;
  nlohmann::json values = nlohmann::json::object();
  std::string csv;
  // Quantities eligible for the fixture store, by name.
  std::vector<std::pair<std::string, double>> frozen;
};

struct Experiment {
  std::string name;
  std::string kind;       // verify | experiment | enumerate | cromulence | distinguish
  std::string anchor;     // the statement the experiment exercises
  std::string operation;  // module operation it calls
  bool stochastic = false;
  // Config fields that identify a run (fixture keys and result records).
  std::vector<std::string> params;
  std::function<ExperimentResult(const ExperimentConfig&)> run;
};

const std::vector<Experiment>& catalog();
// Throws std::invalid_argument for an unknown name.
const Experiment& find_experiment(const std::string& name);
nlohmann::json catalog_json();

// Checks positivity of budgets and sizes and that stochastic experiments
// have a seed; throws std::invalid_argument.
void validate(const ExperimentConfig& cfg, const Experiment& e);

// Named config fields as JSON (for records and fixture keys).
nlohmann::json config_params(const ExperimentConfig& cfg, const Experiment& e);
// "<experiment>:<k=v,...>:<quantity>".
std::string fixture_key(const ExperimentConfig& cfg, const Experiment& e, const std::string& quantity);

// Hash-map iteration order varies between processes, which moves the last
// bits of floating-point sums; reported numbers sit on a 1e-12 grid.
constexpr double kReportScale = 1e12;
nlohmann::json quantized(const nlohmann::json& j);

// {"experiment", "params", "pass", "values"} with quantized values; stable
// across runs.
nlohmann::json result_record(const ExperimentConfig& cfg, const Experiment& e, const ExperimentResult& r);

// Predicates by name: empty, single-pair, one-more-K, cycle, dm-zero-preimage,
// dm-collision, dszs, sponge-preimage, sponge-collision (sponge with
// r = c = half the bits of N, digest 0).
Predicate predicate_by_name(const std::string& name, Index N);
// Database from "x:y,x:y" on [N].
Database parse_pairs(const std::string& text, Index N);

// Configurations whose frozen quantities form the regression suite.
std::vector<ExperimentConfig> frozen_suite();

struct SuiteOutcome {
  std::size_t checked = 0, recorded = 0, failed = 0, missing = 0;
  std::vector<std::string> failures;
  nlohmann::json to_json() const;
};
// Runs every frozen configuration and records into or asserts against the
// store (the store is modified only in record mode).
SuiteOutcome run_frozen_suite(FixtureStore& store, FixtureMode mode, bool force = false);

}  // namespace qperm::xcli
