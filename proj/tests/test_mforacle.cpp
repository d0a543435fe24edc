// Tests for the purified masked-Feistel oracle: twirls, mf operators,
// sophisticated states, intertwiner, projectors, ideal operators,
// cromulence estimates, shifted sampling and the soundness experiment.

#include "doctest.h"
#include "qperm/mforacle.hpp"
#include "test_util.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <map>

using namespace qperm;

namespace {

const FeistelParams kP(1);

// Independent two-round Feistel at n = 1 from explicit bit arithmetic.
std::vector<double> brute_feistel2_mass() {
  std::vector<double> mass(24, 0.0);
  for (Index a = 0; a < 4; ++a)
    for (Index b = 0; b < 4; ++b) {
      const Index g1[2] = {a >> 1, a & 1}, g2[2] = {b >> 1, b & 1};
      std::vector<Index> t(4);
      for (Index x = 0; x < 4; ++x) {
        const Index xl = x >> 1, xr = x & 1;
        const Index r = xr ^ g1[xl];
        const Index l = xl ^ g2[r];
        t[x] = (l << 1) | r;
      }
      mass[permutation_rank(Permutation(t))] += 1.0 / 16;
    }
  return mass;
}

RegisterLayout small_adversary() { return permutation_adversary_layout(4, 1, 0); }

std::vector<Database> databases_up_to(Index t) {
  std::vector<Database> out;
  for (Index s = 0; s <= t; ++s)
    for (const auto& d : injective_databases(kP, s)) out.push_back(d);
  return out;
}

// Random superposition of |b, x, y>|P(I)> over a few adversary basis
// states, plus its images under mfC^dagger and ctrl-mfF mfC^dagger (which
// leave the sophisticated span).
SparseState random_test_state(const SophisticatedBasis& basis, const MfOperators& mf, std::uint64_t seed) {
  Philox rng(seed);
  const RegisterLayout& adv = basis.space().adversary();
  SparseState s(basis.space().layout());
  for (int r = 0; r < 2; ++r) {
    const Index rest = rng.below(adv.dimension());
    for (std::size_t id = 0; id < basis.databases().size(); ++id)
      basis.add_state(s, rest, static_cast<int>(id), cplx(standard_normal(rng), standard_normal(rng)));
  }
  SparseState out = s + mf.mfC_dag.apply(s) + cplx(0.5, 0) * mf.ctrl_mfF.apply(mf.mfC_dag.apply(s));
  return out.normalized();
}

double chi2_pvalue(const std::map<TwirlPair, double>& observed, const std::map<TwirlPair, double>& expected_prob,
                   double samples, int* dof) {
  double chi2 = 0;
  int cells = 0;
  for (const auto& [t, pr] : expected_prob) {
    const double e = pr * samples;
    auto it = observed.find(t);
    const double o = it == observed.end() ? 0 : it->second;
    chi2 += (o - e) * (o - e) / e;
    ++cells;
  }
  for (const auto& [t, o] : observed) REQUIRE(expected_prob.count(t) == 1);
  *dof = cells - 1;
  if (*dof <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(*dof), chi2));
}

}  // namespace

TEST_CASE("twirl distributions") {
  SUBCASE("uniform weights") {
    auto d = TwirlDistribution::uniform(kP);
    CHECK(d.support().size() == 576);
    double total = 0;
    for (const auto& [t, w] : d.support()) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.weight(Permutation::identity(4), Permutation::identity(4)) == doctest::Approx(1.0 / 576));
  }
  SUBCASE("feistel2-pair weights match an independent two-round count") {
    auto d = TwirlDistribution::feistel2_pair(kP);
    const auto mass = brute_feistel2_mass();
    double total = 0;
    for (const auto& [t, w] : d.support()) {
      CHECK(w == doctest::Approx(mass[permutation_rank(t.pi)] * mass[permutation_rank(t.omega.inverse())]));
      total += w;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(feistel_distribution(kP, 2) == mass);
  }
  SUBCASE("flip invariance of both named twirls") {
    for (auto d : {TwirlDistribution::uniform(kP), TwirlDistribution::feistel2_pair(kP)}) {
      const auto f = d.flipped();
      REQUIRE(f.support().size() == d.support().size());
      for (std::size_t i = 0; i < d.support().size(); ++i) {
        CHECK(f.support()[i].first == d.support()[i].first);
        CHECK(f.support()[i].second == doctest::Approx(d.support()[i].second));
      }
    }
  }
  SUBCASE("custom validation") {
    const auto id = Permutation::identity(4);
    CHECK_THROWS_AS(TwirlDistribution::custom(kP, {{TwirlPair{id, id}, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(TwirlDistribution::custom(kP, {{TwirlPair{id, id}, -1.0}, {TwirlPair{id, id}, 2.0}}),
                    std::invalid_argument);
    auto d = TwirlDistribution::custom(kP, {{TwirlPair{id, id}, 1.0}});
    Philox rng(3);
    CHECK(d.sample(rng) == TwirlPair{id, id});
  }
  SUBCASE("n = 2 sampling without enumeration") {
    FeistelParams p2(2);
    auto d = TwirlDistribution::feistel2_pair(p2);
    CHECK_FALSE(d.enumerable());
    Philox rng(5);
    auto t = d.sample(rng);
    CHECK(t.pi.size() == 16);
    CHECK_THROWS_AS(d.support(), std::logic_error);
  }
}

TEST_CASE("star action and resolving sets") {
  const auto id = Permutation::identity(4);
  auto i = Database::from_pairs(4, 4, {{0, 1}, {2, 3}});
  CHECK(star_action(id, i, id) == i);
  Philox rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto pi = random_permutation(4, rng), om = random_permutation(4, rng);
    auto a = star_action(pi, i, om);
    CHECK(a.size() == i.size());
    for (const auto& [x, y] : i.pairs()) CHECK(a.at(pi(x)) == om.inverse()(y));
    CHECK(resolves(kP, {pi, om}, i) == is_allowable(kP, a));
  }
  // Any single pair is allowable, so every twirl resolves it.
  auto one = Database::from_pairs(4, 4, {{1, 2}});
  const auto uniform = TwirlDistribution::uniform(kP);
  for (const auto& [t, w] : uniform.support()) CHECK(resolves(kP, t, one));
  CHECK_THROWS_AS(condition_on_resolving(TwirlDistribution::uniform(kP), i), std::invalid_argument);
}

TEST_CASE("mf operators") {
  PurificationSpace space(kP, small_adversary());
  const auto mf = build_mf_operators(space);
  const auto fs = all_round_functions(kP);
  Philox rng(21);
  SUBCASE("mfP matches masked evaluation on total purifications") {
    for (int trial = 0; trial < 200; ++trial) {
      MaskedFeistelSpec spec{random_permutation(4, rng), random_permutation(4, rng), fs[rng.below(4)],
                             fs[rng.below(4)], fs[rng.below(4)]};
      TripleDB d{Database::from_table(2, spec.h), Database::from_table(2, spec.k), Database::from_table(2, spec.f)};
      const Index b = rng.below(2), x = rng.below(4), y = rng.below(4);
      const Index rest = space.adversary().encode({b, x, y});
      auto out = mf.mfP.apply(SparseState::basis(space.layout(), space.purification_index(spec.pi, spec.omega, d, rest)));
      const Index want = space.adversary().encode({b, x, y ^ masked_feistel_eval(kP, spec, x)});
      CHECK(out.amplitude(space.purification_index(spec.pi, spec.omega, d, want)) == cplx(1));
    }
  }
  SUBCASE("mfF is an involution exchanging the twirls") {
    for (int trial = 0; trial < 50; ++trial) {
      auto pi = random_permutation(4, rng), om = random_permutation(4, rng);
      TripleDB d{Database::from_table(2, fs[rng.below(4)]), Database(2, 2), Database::from_pairs(2, 2, {{1, 0}})};
      const Index i = space.purification_index(pi, om, d, 5);
      auto once = mf.mfF.apply(SparseState::basis(space.layout(), i));
      TripleDB swapped{d.f, d.k, d.h};
      CHECK(once.amplitude(space.purification_index(om.inverse(), pi.inverse(), swapped, 5)) == cplx(1));
      CHECK(distance(mf.mfF.apply(once), SparseState::basis(space.layout(), i)) < 1e-14);
    }
  }
  SUBCASE("cmfO is unitary and preserves validity") {
    SophisticatedBasis basis(space, TwirlDistribution::uniform(kP));
    const auto proj = build_subspace_projectors(basis);
    auto adv = classical_adversary(space.adversary(), {1, 2}, {0, 1});
    SparseState psi = basis.state(Database(4, 4), 0);
    for (std::size_t k = 0; k < 2; ++k) {
      psi = apply_step(adv, k, psi);
      psi = mf.cmfO.apply(psi);
      CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(distance(proj.val.apply(psi), psi) < 1e-10);
      CHECK(distance(mf.cmfO.apply_adjoint(mf.cmfO.apply(psi)), psi) < 1e-10);
    }
  }
}

TEST_CASE("sophisticated states") {
  PurificationSpace space(kP, small_adversary());
  SUBCASE("P(bottom) under the uniform twirl") {
    auto s = sophisticated_state(space, TwirlDistribution::uniform(kP), Database(4, 4));
    CHECK(s.support_size() == 576);
    for (const auto& [i, a] : s.amplitudes()) {
      CHECK(a.real() == doctest::Approx(1.0 / 24));
      CHECK(space.triple_at(i) == TripleDB::empty(kP));
    }
  }
  for (auto dist : {TwirlDistribution::uniform(kP), TwirlDistribution::feistel2_pair(kP)}) {
    CAPTURE(dist.name());
    SophisticatedBasis basis(space, dist);
    const auto dbs = databases_up_to(2);
    std::vector<SparseState> states;
    std::vector<Database> held;
    for (const auto& i : dbs) {
      bool any = false;
      for (const auto& [t, w] : dist.support()) any = any || resolves(kP, t, i);
      if (!any) {
        CHECK_THROWS_AS(basis.state(i), std::invalid_argument);
        continue;
      }
      states.push_back(basis.state(i, 3));
      held.push_back(i);
    }
    // At n = 1 only databases of size <= 1 can be resolved.
    CHECK(held.size() == 17);
    for (std::size_t a = 0; a < states.size(); ++a)
      for (std::size_t b = 0; b < states.size(); ++b)
        CHECK(std::abs(states[a].inner(states[b]) - (a == b ? 1.0 : 0.0)) < 1e-10);

    const auto mf = build_mf_operators(space);
    SophisticatedBasis flipped(space, dist.flipped());
    for (const auto& i : held)
      CHECK(distance(mf.mfF.apply(basis.state(i, 3)), flipped.state(flip(i), 3)) < 1e-10);
  }
}

TEST_CASE("intertwiner") {
  PurificationSpace space(kP, small_adversary(), 2, true);
  for (auto dist : {TwirlDistribution::uniform(kP), TwirlDistribution::feistel2_pair(kP)}) {
    CAPTURE(dist.name());
    SophisticatedBasis basis(space, dist);
    const auto inter = build_intertwiner(basis);
    const auto mf = build_mf_operators(space);
    auto p0 = basis.state(Database(4, 4), 9);
    CHECK(distance(inter.apply(p0), SparseState::basis(space.layout(), space.database_index(Database(4, 4), 9))) <
          1e-12);
    // A decompressed state is orthogonal to every |P(I)> except through its
    // projection; the orthogonal part is fixed.
    auto s = random_test_state(basis, mf, 31);
    auto soph = build_subspace_projectors(basis).soph;
    auto orth = s - soph.apply(s);
    CHECK(distance(inter.apply(orth), orth) < 1e-10);
    CHECK(distance(inter.apply_adjoint(inter.apply(s)), s) < 1e-10);
    CHECK(inter.apply(s).norm() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("subspace projectors and exact identities") {
  PurificationSpace space(kP, small_adversary(), 2, true);
  const auto mf = build_mf_operators(space);
  const auto br = build_branch_operators(space);
  for (auto dist : {TwirlDistribution::uniform(kP), TwirlDistribution::feistel2_pair(kP)}) {
    CAPTURE(dist.name());
    SophisticatedBasis basis(space, dist);
    const auto proj = build_subspace_projectors(basis);
    const auto ideal = build_ideal_operators(basis);
    const auto inter = build_intertwiner(basis);
    const auto s1 = random_test_state(basis, mf, 41), s2 = random_test_state(basis, mf, 42);

    {  // projectors are idempotent and Hermitian
      for (const LinearOp* op : {&proj.soph, &proj.val, &proj.qval, &proj.indb, &proj.ele, &proj.fele, &proj.heart}) {
        const auto a = op->apply(s1);
        CHECK(distance(op->apply(a), a) < 1e-10);
        CHECK(std::abs(s2.inner(a) - op->apply(s2).inner(s1)) < 1e-10);
      }
      for (const auto& i : basis.databases())
        CHECK(distance(proj.soph.apply(basis.state(i, 2)), basis.state(i, 2)) < 1e-12);
    }
    {  // flip and query intertwining
      const auto x = proj.soph.apply(s1);
      CHECK(distance(br.F.apply(inter.apply(x)), inter.apply(mf.mfF.apply(x))) < 1e-10);
      CHECK(distance(br.P.apply(inter.apply(x)), inter.apply(mf.mfP.apply(x))) < 1e-10);
    }
    {  // ideal compression intertwines with pC
      const auto x = proj.ele.apply(s1);
      CHECK(x.norm() > 0.05);
      CHECK(distance(inter.apply(ideal.mfC_bar.apply_adjoint(x)), br.pC.apply_adjoint(inter.apply(x))) < 1e-10);
    }
    {  // ideal compression interchanges the elegant space
      const auto lhs = proj.ele.apply(ideal.mfC_bar.apply(s1));
      const auto rhs = ideal.mfC_bar.apply(proj.indb.apply(proj.soph.apply(s1)));
      CHECK(lhs.norm() > 0.05);
      CHECK(distance(lhs, rhs) < 1e-10);
    }
    {  // ideal oracle is exactly intertwined with cP
      const auto x = proj.fele.apply(s1);
      CHECK(x.norm() > 0.05);
      CHECK(distance(inter.apply(ideal.cmfO_bar.apply(x)), br.cP.apply(inter.apply(x))) < 1e-10);
    }
    {  // ideal and sanitized compressions are unitary
      CHECK(distance(ideal.mfC_bar.apply(ideal.mfC_bar.apply(s1)), s1) < 1e-10);
      CHECK(ideal.mfC_tilde.apply(s1).norm() == doctest::Approx(1.0).epsilon(1e-10));
    }
    {  // measured closeness values
      std::vector<SparseState> ele_span, undefined_span;
      for (Index rest = 0; rest < space.adversary().dimension(); ++rest) {
        const Index x = space.adversary().digit(rest, space.adversary().position("X"));
        for (std::size_t id = 0; id < basis.databases().size(); ++id) {
          const Database& i = basis.databases()[id];
          auto st = basis.state(i, rest);
          if (!i.defined(x)) undefined_span.push_back(st);
          auto e = proj.ele.apply(st);
          if (e.norm() > 1e-12) ele_span.push_back(e);
        }
      }
      const double ideal_gap =
          operator_norm_on_span(ideal.mfC_bar - mf.mfC_dag, ele_span);
      LinearOp not_heart = LinearOp::identity(space.layout()) - proj.heart;
      const double heart_gap = operator_norm_on_span(not_heart, undefined_span);
      MESSAGE("ideal vs real decompression on the elegant span: " << ideal_gap);
      MESSAGE("heart gentleness: " << heart_gap);
      CHECK(ideal_gap <= 2.0 + 1e-12);
      CHECK(heart_gap <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("cromulence estimates") {
  SUBCASE("uniform twirl, n = 1, empty database: exact conditions") {
    auto rep = estimate_cromulence(TwirlDistribution::uniform(kP), Database(4, 4), 0, 0, 1);
    CHECK(rep.left_marginal.exact);
    CHECK(rep.resolve.value == doctest::Approx(1.0));
    CHECK(rep.left_marginal.value == doctest::Approx(0.5).epsilon(1e-12));
    // Two distinct points both land in {0, 1}: (2/4) (1/3) = 1/6.
    CHECK(rep.joint.value == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(rep.ratio_deviation < 1e-12);
  }
  SUBCASE("single-pair database at n = 1 never allows a new point") {
    auto rep = estimate_cromulence(TwirlDistribution::uniform(kP), Database::from_pairs(4, 4, {{0, 0}}), 1, 0, 1);
    CHECK(rep.resolve.value == 0.0);
    CHECK(std::isnan(rep.left_marginal.value));
  }
  SUBCASE("uniform twirl, n = 2, one pair: condition 1") {
    FeistelParams p2(2);
    auto rep = estimate_cromulence(TwirlDistribution::uniform(p2), Database::from_pairs(16, 16, {{3, 7}}), 5, 20000,
                                   17);
    MESSAGE("resolve probability " << rep.resolve.value << " [" << rep.resolve.lo << ", " << rep.resolve.hi << "]");
    // Independent count: A = {(a, b)} allows u iff u_L != a_L, an event of
    // probability 12/15 for the uniform pi(x) != pi(3).
    CHECK(rep.resolve.lo <= 0.8);
    CHECK(rep.resolve.hi >= 0.8);
  }
  SUBCASE("feistel2-pair twirl, n = 2: condition 2 within 3 sigma") {
    FeistelParams p2(2);
    auto rep = estimate_cromulence(TwirlDistribution::feistel2_pair(p2), Database::from_pairs(16, 16, {{3, 7}}), 5,
                                   100000, 23);
    const double n = static_cast<double>(rep.left_marginal.trials);
    const double sigma = std::sqrt(0.25 * 0.75 / n);
    MESSAGE("left marginal " << rep.left_marginal.value << " over " << n << " samples");
    CHECK(std::abs(rep.left_marginal.value - 0.25) <= 3 * sigma);
  }
  SUBCASE("acceptance floor") {
    CromulenceOptions o;
    o.acceptance_floor = 0.5;
    auto i = Database::from_pairs(4, 4, {{0, 0}, {1, 2}});
    CHECK_THROWS(estimate_cromulence(TwirlDistribution::uniform(kP), i, 2, 0, 1, o));
  }
  SUBCASE("Wilson interval") {
    auto e = wilson_estimate(50, 100);
    CHECK(e.value == doctest::Approx(0.5));
    CHECK(e.lo == doctest::Approx(0.4038).epsilon(1e-3));
    CHECK(e.hi == doctest::Approx(0.5962).epsilon(1e-3));
  }
}

TEST_CASE("shifted Feistel sampler") {
  const auto dist = TwirlDistribution::feistel2_pair(kP);
  for (const Database& i : {Database(4, 4), Database::from_pairs(4, 4, {{0, 1}}), Database::from_pairs(4, 4, {{3, 0}})}) {
    CAPTURE(i.to_text());
    std::map<TwirlPair, double> expected;
    const auto conditioned = condition_on_resolving(dist, i);
    for (const auto& [t, w] : conditioned.support()) expected[t] = w;
    const double samples = 60000;
    std::map<TwirlPair, double> shifted, direct, flipped;
    Philox a(101), b(102), c(103);
    for (int s = 0; s < samples; ++s) {
      shifted[shifted_sampler(kP, i, a)] += 1;
      direct[rejection_sampler(dist, i, b)] += 1;
      auto t = rejection_sampler(dist, flip(i), c);
      flipped[TwirlPair{t.omega.inverse(), t.pi.inverse()}] += 1;
    }
    int dof = 0;
    const double ps = chi2_pvalue(shifted, expected, samples, &dof);
    const double pd = chi2_pvalue(direct, expected, samples, &dof);
    const double pf = chi2_pvalue(flipped, expected, samples, &dof);
    MESSAGE("cells " << dof + 1 << " shifted p = " << ps << " direct p = " << pd << " flipped p = " << pf);
    CHECK(ps > 0.001);
    CHECK(pd > 0.001);
    CHECK(pf > 0.001);
  }
  SUBCASE("shift symmetries") {
    FeistelParams p2(2);
    Philox rng(7);
    auto i = Database::from_pairs(16, 16, {{1, 4}, {9, 12}});
    const auto fs = [&] {
      Database d(4, 4);
      for (Index w = 0; w < 4; ++w) d = assign(d, w, rng.below(4));
      return d;
    };
    for (int trial = 0; trial < 200; ++trial) {
      Feistel2Databases d{fs(), fs(), fs(), fs()};
      const auto base = twirl_from_rounds(p2, d);
      const auto a = star_action(base.pi, i, base.omega);
      const Index s = rng.below(4);
      for (const auto& moved : {right_shift_pi(d, s), right_shift_omega(d, s)}) {
        const auto t = twirl_from_rounds(p2, moved);
        const auto a2 = star_action(t.pi, i, t.omega);
        for (const auto& [x, y] : i.pairs()) {
          CHECK(p2.left(a2.at(t.pi(x))) == p2.left(a.at(base.pi(x))));
          CHECK(p2.left(t.omega.inverse()(y)) == p2.left(base.omega.inverse()(y)));
        }
      }
      const auto t = twirl_from_rounds(p2, left_shift(d, s));
      CHECK(resolves(p2, t, i) == resolves(p2, base, i));
    }
  }
  SUBCASE("unsatisfiable conditioning") {
    Philox rng(1);
    CHECK_THROWS_AS(shifted_sampler(kP, Database::from_pairs(4, 4, {{0, 0}, {1, 1}}), rng, 200), std::runtime_error);
  }
}

TEST_CASE("soundness experiment") {
  const auto layout = small_adversary();
  SUBCASE("no queries") {
    auto adv = random_adversary(layout, 0, 3);
    auto rep = run_soundness_experiment(TwirlDistribution::uniform(kP), adv);
    CHECK(rep.values["masked_vs_cp"].get<double>() < 1e-12);
    CHECK(rep.values["feistel7_vs_uniform"].get<double>() < 1e-12);
    CHECK(rep.values["hybrid_sum"].get<double>() == 0.0);
  }
  for (auto dist : {TwirlDistribution::uniform(kP), TwirlDistribution::feistel2_pair(kP)}) {
    CAPTURE(dist.name());
    for (std::size_t q : {1u, 2u}) {
      auto adv = random_adversary(layout, q, 40 + q);
      auto rep = run_soundness_experiment(dist, adv, 40 + q);
      MESSAGE(rep.to_json().dump());
      const auto& v = rep.values;
      CHECK(v["cmfo_vs_masked"].get<double>() < 1e-10);
      CHECK(v["masked_vs_cp"].get<double>() <= v["final_hybrid_distance"].get<double>() + 1e-8);
      CHECK(v["final_hybrid_distance"].get<double>() <= v["hybrid_sum"].get<double>() + 1e-8);
      CHECK(v["hybrid_deviations"].size() == q);
    }
  }
}
