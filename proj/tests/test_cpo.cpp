// Tests for the compressed permutation oracle.

#include "doctest.h"
#include "qperm/cpo.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace qperm;

namespace {

RegisterLayout db_layout(const PermOracleConfig& cfg) { return RegisterLayout({{"D", cfg.codec().cardinality()}}); }

SparseState db_state(const PermOracleConfig& cfg, const Database& d) {
  return SparseState::basis(db_layout(cfg), cfg.codec().encode(d));
}

std::vector<Index> injective_raws(Index n, Index t) { return DatabaseSpace(DbKind::Injective, n, n, t).raws(); }

// Random state on B, X, Y, D with databases of size < t.
SparseState random_bxyd_state(const PermOracleConfig& cfg, const RegisterLayout& layout, Index t, std::uint64_t seed) {
  std::vector<Index> basis;
  for (Index b = 0; b < 2; ++b)
    for (Index x = 0; x < cfg.N; ++x)
      for (Index y = 0; y < cfg.N; ++y)
        for (Index raw : injective_raws(cfg.N, t)) basis.push_back(layout.encode({b, x, y, raw}));
  return testutil::random_state_on(layout, basis, seed);
}

// Forward query at x, move the answer into X, then query the inverse.
AdversaryCircuit round_trip_adversary(const RegisterLayout& layout, Index x) {
  AdversaryCircuit adv{layout, 0, {}};
  adv.steps.push_back({xor_constant_gate(layout, "X", x)});
  adv.steps.push_back({xor_constant_gate(layout, "X", x), xor_copy_gate(layout, "Y", "X"),
                       xor_copy_gate(layout, "X", "Y"), xor_constant_gate(layout, "B", 1)});
  adv.steps.push_back({});
  return adv;
}

double probability_y_equals(const SparseState& s, Index y) {
  const std::size_t yp = s.layout().position("Y");
  double p = 0;
  for (const auto& [i, a] : s.amplitudes())
    if (s.layout().digit(i, yp) == y) p += std::norm(a);
  return p;
}

}  // namespace

TEST_CASE("pC on small databases") {
  PermOracleConfig cfg{4, 4};
  auto layout = db_layout(cfg);
  DatabaseSpace space(DbKind::Injective, 4, 4, 4);
  SUBCASE("empty database") {
    auto out = build_pc_at(cfg, layout, 0).apply(db_state(cfg, Database(4, 4)));
    CHECK(distance(out, uniform_completion_state(space, Database(4, 4), 0)) < 1e-12);
    for (const auto& [i, a] : out.amplitudes()) CHECK(std::abs(a - 0.5) < 1e-12);
  }
  SUBCASE("uniform completion maps back") {
    Database i = Database::from_pairs(4, 4, {{1, 3}});
    auto plus = uniform_completion_state(space, i, 0);
    CHECK(distance(build_pc_at(cfg, layout, 0).apply(plus), db_state(cfg, i)) < 1e-12);
  }
  SUBCASE("difference vectors are fixed") {
    Database i = Database::from_pairs(4, 4, {{1, 3}});
    LinearOp pc = build_pc_at(cfg, layout, 0);
    for (Index y = 0; y < 3; ++y)
      for (Index yp = y + 1; yp < 3; ++yp) {
        auto diff = db_state(cfg, assign(i, 0, y)) - db_state(cfg, assign(i, 0, yp));
        CHECK(distance(pc.apply(diff), diff) < 1e-12);
      }
  }
  SUBCASE("involution") {
    LinearOp pc = build_pc_at(cfg, layout, 2);
    auto r = testutil::random_state_on(layout, injective_raws(4, 3), 4);
    CHECK(distance(pc.apply(pc.apply(r)), r) < 1e-12);
  }
  SUBCASE("works beyond half the domain") {
    Database i = Database::from_pairs(4, 4, {{1, 3}, {2, 0}, {3, 1}});
    auto out = build_pc_at(cfg, layout, 0).apply(db_state(cfg, i));
    CHECK(distance(out, db_state(cfg, assign(i, 0, 2))) < 1e-12);
  }
}

TEST_CASE("flip operator") {
  PermOracleConfig cfg{4, 4};
  auto layout = db_layout(cfg);
  LinearOp f = build_flip(cfg, layout);
  auto bottom = db_state(cfg, Database(4, 4));
  CHECK(distance(f.apply(bottom), bottom) == 0.0);
  CHECK(distance(f.apply(db_state(cfg, Database::from_pairs(4, 4, {{0, 2}}))),
                 db_state(cfg, Database::from_pairs(4, 4, {{2, 0}}))) == 0.0);
  auto r = testutil::random_state_on(layout, injective_raws(4, 4), 8);
  CHECK(distance(f.apply(f.apply(r)), r) < 1e-12);
}

TEST_CASE("cP branches") {
  PermOracleConfig cfg{4, 4};
  const DbCodec codec = cfg.codec();
  RegisterLayout layout({{"B", 2}, {"X", 4}, {"Y", 4}, {"D", codec.cardinality()}});
  LinearOp cp = build_cp(cfg, layout);
  LinearOp pc = build_pc(cfg, layout);
  LinearOp p = build_purified_query(layout, codec);
  LinearOp f = build_flip(cfg, layout);
  SUBCASE("forward branch is pC P pC") {
    auto r = random_bxyd_state(cfg, layout, 3, 2);
    SparseState fwd(layout), inv(layout);
    for (const auto& [i, a] : r.amplitudes()) (layout.digit(i, 0) ? inv : fwd).add(i, a);
    CHECK(distance(cp.apply(fwd), pc.apply(p.apply(pc.apply(fwd)))) < 1e-12);
    CHECK(distance(cp.apply(inv), f.apply(pc.apply(p.apply(pc.apply(f.apply(inv)))))) < 1e-12);
  }
  SUBCASE("direction is irrelevant on the empty database") {
    // F fixes the empty database, so the inverse branch is the forward one
    // followed by F, which the adversary cannot see.
    for (Index x = 0; x < 4; ++x) {
      auto a = cp.apply(SparseState::from_digits(layout, {0, x, 1, codec.empty()}));
      auto b = cp.apply(SparseState::from_digits(layout, {1, x, 1, codec.empty()}));
      SparseState b0(layout);
      for (const auto& [i, v] : b.amplitudes()) b0.add(layout.with_digit(i, 0, 0), v);
      CHECK(distance(f.apply(a), b0) < 1e-12);
      CHECK(trace_distance(partial_trace(a, {"X", "Y"}), partial_trace(b, {"X", "Y"})) < 1e-12);
    }
  }
  SUBCASE("unitary") {
    auto r = random_bxyd_state(cfg, layout, 3, 6);
    auto out = cp.apply(r);
    CHECK(std::abs(out.norm() - 1.0) < 1e-10);
    CHECK(distance(cp.apply_adjoint(out), r) < 1e-10);
  }
}

TEST_CASE("round trip recovers the input") {
  // A classical forward query followed by the inverse query of its answer
  // returns x with certainty for a true permutation.
  for (Index n : {4, 8}) {
    PermOracleConfig cfg{n, 2};
    auto layout = permutation_adversary_layout(n, 0, 0);
    auto adv = round_trip_adversary(layout, 1);
    auto run = run_cp_experiment(cfg, adv, false);
    double p = probability_y_equals(run.state, 1);
    // Closed form: the answer survives with amplitude (1 - 1/N)^2 + 1/N.
    const double inv = 1.0 / static_cast<double>(n);
    const double a = (1 - inv) * (1 - inv) + inv;
    CHECK(p == doctest::Approx(a * a).epsilon(1e-12));
    CHECK(p >= 1.0 - 2.0 * inv);
    if (n == 4) {
      auto std_view = run_perm_standard_experiment(cfg, adv);
      double ps = 0;
      for (Index i = 0; i < layout.dimension(); ++i)
        if (layout.digit(i, layout.position("Y")) == 1) ps += std_view.rho.entries()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
      CHECK(ps == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("standard permutation experiment") {
  PermOracleConfig cfg{4, 4};
  SUBCASE("no queries") {
    auto layout = permutation_adversary_layout(4, 0, 0);
    auto adv = random_adversary(layout, 0, 3);
    Vector v = apply_step(adv, 0, SparseState::basis(layout, 0)).to_dense();
    CHECK((run_perm_standard_experiment(cfg, adv).rho.entries() - v * v.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("fresh forward query is uniform") {
    auto layout = permutation_adversary_layout(4, 0, 0);
    auto rho = run_perm_standard_experiment(cfg, classical_adversary(layout, {2}, {0})).rho;
    for (Index y = 0; y < 4; ++y) {
      auto k = static_cast<Eigen::Index>(layout.encode({0, 2, y}));
      CHECK(rho.entries()(k, k).real() == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("two distinct forward queries never collide") {
    auto layout = permutation_adversary_layout(4, 0, 2);
    auto rho = run_perm_standard_experiment(cfg, classical_adversary(layout, {0, 3}, {0, 0}, 2), 6, {"oy1", "oy2"}).rho;
    for (Index a = 0; a < 4; ++a)
      for (Index b = 0; b < 4; ++b) {
        auto k = static_cast<Eigen::Index>(a * 4 + b);
        CHECK(rho.entries()(k, k).real() == doctest::Approx(a == b ? 0.0 : 1.0 / 12).epsilon(1e-12));
      }
  }
  SUBCASE("cap") { CHECK_THROWS_AS(run_perm_standard_experiment(PermOracleConfig{8, 8}, random_adversary(permutation_adversary_layout(8, 0, 0), 1, 1)), std::length_error); }
}

TEST_CASE("compressed permutation experiment") {
  SUBCASE("no queries") {
    PermOracleConfig cfg{4, 4};
    auto run = run_cp_experiment(cfg, random_adversary(permutation_adversary_layout(4, 0, 0), 0, 2), false);
    CHECK(amplitude_outside(run.state, cfg.codec(), 0) == 0.0);
  }
  for (Index n : {4, 8})
    for (std::size_t q = 1; q <= 3; ++q) {
      PermOracleConfig cfg{n, static_cast<Index>(q)};
      auto run = run_cp_experiment(cfg, random_adversary(permutation_adversary_layout(n, 0, 0), q, 60 + q), false);
      CHECK(amplitude_outside(run.state, cfg.codec(), q) <= 1e-12);
      CHECK(std::abs(run.state.norm() - 1.0) < 1e-10);
    }
  SUBCASE("views are close but measured, not asserted equal") {
    PermOracleConfig cfg{4, 4};
    for (std::size_t q = 1; q <= 3; ++q) {
      auto adv = random_adversary(permutation_adversary_layout(4, 0, 0), q, 100 + q);
      double td = trace_distance(run_perm_standard_experiment(cfg, adv).rho, run_cp_experiment(cfg, adv).view);
      MESSAGE("N=4 q=" << q << " trace distance " << td);
      CHECK(td >= 0.0);
      CHECK(td <= 1.0);
    }
  }
}

TEST_CASE("one forward query matches the compressed function oracle") {
  // On databases of size <= 1 the image constraint is empty, so pC = fc and
  // a single forward query of cP equals one query of CF.
  PermOracleConfig cfg{4, 4};
  FunctionOracleConfig fcfg{4, 4, 4};
  auto layout = permutation_adversary_layout(4, 2, 0);
  Philox rng(31);
  AdversaryCircuit adv{layout, 0, {}};
  for (int k = 0; k < 2; ++k) adv.steps.push_back({random_gate(layout, {"X", "Y", "W"}, rng)});
  auto perm_run = run_cp_experiment(cfg, adv);
  SparseState init = compressed_initial_state(adv, fcfg.codec());
  auto fn_state = run_queries(adv, init, build_cf(fcfg, init.layout()));
  CHECK(distance(perm_run.state, fn_state) < 1e-12);
}

TEST_CASE("permutation fundamental lemma") {
  PermOracleConfig cfg{4, 4};
  SUBCASE("honest classical adversary") {
    auto layout = permutation_adversary_layout(4, 0, 1);
    auto check = perm_fundamental_lemma_check(cfg, classical_adversary(layout, {2}, {0}, 1), 1);
    MESSAGE("honest lhs " << check.lhs << " rhs " << check.rhs);
    CHECK(check.lhs > 0.9);
    CHECK(check.rhs >= 1.0);
    CHECK(check.holds());
  }
  SUBCASE("blind guesser") {
    PermOracleConfig big{8, 8};
    auto layout = permutation_adversary_layout(8, 0, 2);
    auto check = perm_fundamental_lemma_check(big, guessing_adversary(layout, 1, {{0, 5}, {3, 2}}), 2);
    CHECK(check.compressed == 0.0);
    CHECK(check.lhs <= 2.0 / std::sqrt(8.0 - 1 - 2) + 1e-12);
    CHECK(check.holds());
  }
  SUBCASE("no pairs") {
    auto check = perm_fundamental_lemma_check(cfg, random_adversary(permutation_adversary_layout(4, 0, 0), 2, 3), 0);
    CHECK(check.lhs == doctest::Approx(1.0));
    CHECK(check.holds());
  }
  SUBCASE("seeded random circuits") {
    for (Index n : {4, 8})
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        PermOracleConfig c{n, n};
        std::size_t q = 1 + seed % 2;
        auto adv = random_adversary(permutation_adversary_layout(n, 0, 1), q, 200 + seed, 1);
        CHECK(perm_fundamental_lemma_check(c, adv, 1).holds());
      }
  }
  SUBCASE("slack must be positive") {
    auto layout = permutation_adversary_layout(4, 0, 1);
    CHECK_THROWS_AS(perm_fundamental_lemma_check(cfg, random_adversary(layout, 3, 1, 1), 1), std::invalid_argument);
  }
}

TEST_CASE("JSON record") {
  auto j = perm_record(PermOracleConfig{4, 4}, 2, 9, 0.1, LemmaCheck{0.2, 0.1, 0.3});
  CHECK(j["N"] == 4);
  CHECK(j["q"] == 2);
  CHECK(j["lemma_rhs"] == 0.3);
}
