// Tests for the fixture store, the experiment catalog and the xcli binary
// (exit codes, config precedence, reproducible output).

#include "doctest.h"
#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace qperm;
using namespace qperm::xcli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("qperm_xcli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out;
};

// Runs the built binary with `args`; stdout goes to a scratch file.
Run run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch_dir() / ("out" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(QPERM_XCLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

}  // namespace

TEST_CASE("fixture store records, checks and round-trips") {
  FixtureStore store;
  CHECK(store.record("a:b:c", 0.25, 1e-9, "abc"));
  CHECK_FALSE(store.record("a:b:c", 0.25 + 1e-12, 1e-9, "abc"));  // within tolerance: unchanged
  CHECK(store.at("a:b:c").value == 0.25);
  CHECK_THROWS_AS(store.record("a:b:c", 0.3, 1e-9, "abc"), std::runtime_error);
  CHECK(store.record("a:b:c", 0.3, 1e-9, "abc", true));
  CHECK(store.at("a:b:c").value == 0.3);
  CHECK_THROWS_AS(store.record("nan", std::nan(""), 1e-9, "abc"), std::invalid_argument);
  CHECK_THROWS_AS(store.record("inf", std::numeric_limits<double>::infinity(), 1e-9, "abc"), std::invalid_argument);

  const auto ok = store.check("a:b:c", 0.3 + 5e-10);
  CHECK(ok.ok);
  const auto bad = store.check("a:b:c", 0.3 + 2e-9);
  CHECK_FALSE(bad.ok);
  CHECK_FALSE(bad.missing);
  const auto missing = store.check("zzz", 1.0);
  CHECK_FALSE(missing.ok);
  CHECK(missing.missing);

  const fs::path path = scratch_dir() / "store.json";
  store.save(path.string());
  const FixtureStore back = FixtureStore::load(path.string());
  REQUIRE(back.entries().size() == 1);
  CHECK(back.at("a:b:c").value == 0.3);
  CHECK(back.at("a:b:c").git_ref == "abc");
  CHECK(back.at("a:b:c").recorded_at.size() == 20);  // YYYY-MM-DDTHH:MM:SSZ

  CHECK(FixtureStore::load((scratch_dir() / "absent.json").string()).entries().empty());
  std::ofstream(scratch_dir() / "v2.json") << R"({"version": 2, "entries": {}})";
  CHECK_THROWS_AS(FixtureStore::load((scratch_dir() / "v2.json").string()), std::runtime_error);
  std::ofstream(scratch_dir() / "junk.json") << "{not json";
  CHECK_THROWS_AS(FixtureStore::load((scratch_dir() / "junk.json").string()), std::runtime_error);
}

TEST_CASE("catalog entries are complete and addressable") {
  const auto& cat = catalog();
  CHECK(cat.size() >= 20);
  std::set<std::string> names;
  const std::set<std::string> kinds = {"verify", "experiment", "enumerate", "cromulence", "distinguish"};
  for (const auto& e : cat) {
    CAPTURE(e.name);
    CHECK(names.insert(e.name).second);
    CHECK(kinds.count(e.kind) == 1);
    CHECK_FALSE(e.anchor.empty());
    CHECK(e.operation.find('.') != std::string::npos);
    CHECK(static_cast<bool>(e.run));
    if (e.stochastic) CHECK(std::find(e.params.begin(), e.params.end(), "seed") != e.params.end());
    CHECK(&find_experiment(e.name) == &e);
  }
  CHECK_THROWS_AS(find_experiment("no-such-thing"), std::invalid_argument);
  const auto j = catalog_json();
  CHECK(j.size() == cat.size());
  CHECK(j[0].contains("operation"));
  CHECK(j[0].contains("anchor"));
}

TEST_CASE("config helpers") {
  ExperimentConfig c;
  c.N = 4;
  c.q = 1;
  c.seed = 101;
  CHECK(fixture_key(c, find_experiment("cpo-distance"), "trace_distance") ==
        "cpo-distance:N=4,q=1,seed=101:trace_distance");
  c.variant = "cycle-free";
  c.t = 1;
  CHECK(fixture_key(c, find_experiment("compression-closeness"), "closeness") ==
        "compression-closeness:N=4,t=1,variant=cycle-free:closeness");

  ExperimentConfig s;
  CHECK_THROWS_AS(validate(s, find_experiment("soundness")), std::invalid_argument);
  s.seed = 3;
  CHECK_NOTHROW(validate(s, find_experiment("soundness")));
  s.budget = 0;
  CHECK_THROWS_AS(validate(s, find_experiment("soundness")), std::invalid_argument);

  CHECK(predicate_by_name("dm-collision", 8).name == "dm-collision");
  CHECK_THROWS_AS(predicate_by_name("dszs", 8), std::invalid_argument);
  CHECK_THROWS_AS(predicate_by_name("one-more-x", 4), std::invalid_argument);
  CHECK_THROWS_AS(predicate_by_name("nope", 4), std::invalid_argument);
  CHECK_THROWS_AS(predicate_by_name("cycle", 6), std::invalid_argument);

  const Database d = parse_pairs("0:1,2:3", 4);
  CHECK(d.size() == 2);
  CHECK(d.at(0) == 1);
  CHECK(d.at(2) == 3);
  CHECK(parse_pairs("", 4).size() == 0);
  CHECK_THROWS_AS(parse_pairs("0:1,1:1", 4), std::invalid_argument);  // not injective
  CHECK_THROWS_AS(parse_pairs("0:1,0:2", 4), std::invalid_argument);  // repeated point
  CHECK_THROWS_AS(parse_pairs("0:4", 4), std::invalid_argument);
  CHECK_THROWS_AS(parse_pairs("0-1", 4), std::invalid_argument);

  const nlohmann::json q = quantized({{"a", 0.1234567890123456}, {"b", {1e-14, -1e-14}}, {"c", 3}});
  CHECK(q["a"].get<double>() == 0.123456789012);
  CHECK(q["b"][0].get<double>() == 0.0);
  CHECK_FALSE(std::signbit(q["b"][1].get<double>()));
  CHECK(q["c"].get<int>() == 3);
}

TEST_CASE("xcli exit codes") {
  CHECK(run_cli("list-experiments").code == 0);
  CHECK(nlohmann::json::parse(run_cli("list-experiments --json").out).size() == catalog().size());
  CHECK(run_cli("verify cfo-soundness --seed 3").code == 0);
  CHECK(run_cli("verify no-such-entry").code == 2);
  CHECK(run_cli("verify cfo-soundness --no-such-flag").code == 2);
  CHECK(run_cli("experiment cfo-soundness").code == 2);  // a verify entry under the wrong subcommand
  CHECK(run_cli("experiment soundness").code == 2);      // stochastic without a seed
  CHECK(run_cli("verify cfo-soundness -N 6").code == 2);
  CHECK(run_cli("enumerate databases --kind function -M 16 -N 16 -t 16").code == 3);
  // The binomial form of the counting statement fails at n = 2, t = 2.
  CHECK(run_cli("verify counting-lemma -n 2 -t 2 --seed 1").code == 1);
}

TEST_CASE("xcli output is byte-identical for a fixed seed") {
  const std::string args = "experiment soundness --twirl feistel2-pair -q 2 --seed 9";
  const Run a = run_cli(args), b = run_cli(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["experiment"] == "soundness");
  CHECK(j["params"]["seed"] == 9);
  CHECK_FALSE(j["values"].contains("runtime_ms"));

  const std::string mc = "distinguish --attack xor-statistic -n 2 --rounds 3 --seed 4 --budget 3000";
  CHECK(run_cli(mc).out == run_cli(mc).out);

  const fs::path out = scratch_dir() / "rec.json", csv = scratch_dir() / "rows.csv";
  const Run c = run_cli("verify sparsity --predicate dm-collision -N 8 -t 2 --output " + out.string() + " --csv " +
                     csv.string());
  CHECK(slurp(out) == c.out);
  CHECK(slurp(csv).rfind("predicate,N,t,s_t,claim\n", 0) == 0);
}

TEST_CASE("xcli config file precedence") {
  const fs::path cfg = scratch_dir() / "run.toml";
  std::ofstream(cfg) << "N = 8\nq = 3\nseed = 11\n";
  const auto from_file = nlohmann::json::parse(run_cli("verify cpo-bounded-growth --config " + cfg.string()).out);
  CHECK(from_file["params"]["N"] == 8);
  CHECK(from_file["params"]["q"] == 3);
  CHECK(from_file["params"]["seed"] == 11);
  const auto flag_wins =
      nlohmann::json::parse(run_cli("verify cpo-bounded-growth -q 1 --config " + cfg.string()).out);
  CHECK(flag_wins["params"]["N"] == 8);
  CHECK(flag_wins["params"]["q"] == 1);
  const auto defaults = nlohmann::json::parse(run_cli("verify cpo-bounded-growth").out);
  CHECK(defaults["params"]["N"] == 4);
  CHECK(defaults["params"]["q"] == 2);
  CHECK(defaults["params"]["seed"] == 0);
}

TEST_CASE("xcli fixture modes") {
  const fs::path store = scratch_dir() / "fixtures.json";
  fs::remove(store);
  const std::string base = "experiment cpo-distance -N 4 -q 1 --seed 101 --fixture-file " + store.string();

  CHECK(run_cli(base + " --fixtures assert").code == 2);  // missing entry
  CHECK_FALSE(fs::exists(store));                      // assert mode never writes
  CHECK(run_cli(base + " --fixtures record").code == 0);
  const std::string recorded = slurp(store);
  const auto j = nlohmann::json::parse(recorded);
  CHECK(j["version"] == FixtureStore::kVersion);
  const auto& entry = j["entries"]["cpo-distance:N=4,q=1,seed=101:trace_distance"];
  CHECK(std::abs(entry["value"].get<double>() - 0.148809) < 1e-6);
  CHECK(run_cli(base + " --fixtures record").code == 0);  // unchanged value: no rewrite of the entry
  CHECK(slurp(store) == recorded);
  CHECK(run_cli(base + " --fixtures assert").code == 0);
  CHECK(slurp(store) == recorded);

  auto tampered = j;
  tampered["entries"]["cpo-distance:N=4,q=1,seed=101:trace_distance"]["value"] = 0.2;
  std::ofstream(store) << tampered.dump(2);
  CHECK(run_cli(base + " --fixtures assert").code == 1);
  CHECK(run_cli(base + " --fixtures record").code == 1);  // differing value needs --force
  CHECK(run_cli(base + " --fixtures record --force").code == 0);
  CHECK(run_cli(base + " --fixtures assert").code == 0);
}
