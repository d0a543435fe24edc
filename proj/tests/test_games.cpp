// Tests for predicate search games, sparsity, modified compressions, the
// sponge construction and the Feistel distinguishers.

#include "doctest.h"
#include "qperm/games.hpp"
#include "qperm/mforacle.hpp"
#include "test_util.hpp"

#include <cmath>
#include <set>

using namespace qperm;

namespace {

std::vector<Database> injective_upto(Index N, Index t) { return enumerate_databases(DbKind::Injective, N, N, t); }

// Independent cycle test: follow the partial functional graph from each point.
bool has_cycle(const Database& d) {
  for (Index s = 0; s < d.m(); ++s) {
    Index x = s;
    for (Index step = 0; step < d.m() && d.defined(x); ++step) {
      x = d.at(x);
      if (x == s) return true;
    }
  }
  return false;
}

// Sparsity of a single-pair predicate given by its set of pairs.
std::size_t single_pair_sparsity(const std::set<std::pair<Index, Index>>& r, Index N, Index t) {
  std::size_t best = 0;
  for (const auto& d : injective_upto(N, t)) {
    bool sat = false;
    for (const auto& p : d.pairs()) sat = sat || r.count(p);
    if (sat) continue;
    for (Index v = 0; v < N; ++v) {
      std::size_t fwd = 0, bwd = 0;
      for (Index w = 0; w < N; ++w) {
        if (!d.defined(v) && !d.in_image(w) && r.count({v, w})) ++fwd;
        if (!d.in_image(v) && !d.defined(w) && r.count({w, v})) ++bwd;
      }
      best = std::max({best, fwd, bwd});
    }
  }
  return best;
}

// DM collision sparsity by direct counting over x xor y values.
std::size_t dm_collision_sparsity(Index N, Index t) {
  std::size_t best = 0;
  for (const auto& d : injective_upto(N, t)) {
    std::set<Index> xors;
    for (const auto& [x, y] : d.pairs()) xors.insert(x ^ y);
    if (xors.size() < d.size()) continue;
    for (Index v = 0; v < N; ++v) {
      std::size_t fwd = 0, bwd = 0;
      for (Index w = 0; w < N; ++w) {
        fwd += !d.defined(v) && !d.in_image(w) && xors.count(v ^ w);
        bwd += !d.in_image(v) && !d.defined(w) && xors.count(v ^ w);
      }
      best = std::max({best, fwd, bwd});
    }
  }
  return best;
}

// Independent Feistel evaluation by bit arithmetic (high half first).
Index feistel_bits(unsigned n, const std::vector<std::vector<Index>>& g, Index x) {
  const Index mask = (Index{1} << n) - 1;
  Index l = x >> n, r = x & mask;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k % 2 == 0)
      r ^= g[k][l];
    else
      l ^= g[k][r];
  }
  return (l << n) | r;
}

// Full output probe: q = N - 1 classical queries, then the last value is
// the XOR of the others (the XOR over [N] vanishes for N >= 4).
AdversaryCircuit full_probe_adversary(Index N) {
  const RegisterLayout layout = permutation_adversary_layout(N, 1, N);
  std::vector<Index> xs;
  for (Index x = 0; x + 1 < N; ++x) xs.push_back(x);
  AdversaryCircuit adv = classical_adversary(layout, xs, {}, N);
  std::vector<std::string> oys;
  for (Index i = 1; i <= N; ++i) oys.push_back("oy" + std::to_string(i));
  const Index dim = static_cast<Index>(std::pow(static_cast<double>(N), static_cast<double>(N)));
  auto fill = [N](Index idx) {
    std::vector<Index> d(N);
    for (Index k = N; k-- > 0;) {
      d[k] = idx % N;
      idx /= N;
    }
    Index acc = 0;
    for (Index k = 0; k + 1 < N; ++k) acc ^= d[k];
    d[N - 1] ^= acc;
    Index out = 0;
    for (Index k = 0; k < N; ++k) out = out * N + d[k];
    return out;
  };
  adv.steps.back().push_back({oys, permutation_matrix(dim, fill)});
  adv.steps.back().push_back(xor_constant_gate(layout, "ox" + std::to_string(N), N - 1));
  return adv;
}

}  // namespace

TEST_CASE("predicates and the predicate projector") {
  const Index N = 4;
  const auto dbs = injective_upto(N, N);
  {  // cycles agree with a graph walk
    const auto cyc = predicates::cycle(N);
    for (const auto& d : dbs) CHECK(satisfies(cyc, d) == has_cycle(d));
  }
  {  // one-more needs k pairs; DM collision needs two pairs with equal x xor y
    for (const auto& d : dbs) {
      CHECK(satisfies(predicates::one_more(3), d) == (d.size() >= 3));
      std::set<Index> xors;
      for (const auto& [x, y] : d.pairs()) xors.insert(x ^ y);
      CHECK(satisfies(predicates::dm_collision(), d) == (xors.size() < d.size()));
      CHECK(satisfies(predicates::single_pair(), d) == (d.size() >= 1));
      CHECK_FALSE(satisfies(predicates::empty(), d));
    }
  }
  {  // DSZS projector rank counts databases holding a pair (x || 0, y || 0)
    DatabaseSpace space(DbKind::Injective, N, N, N);
    std::size_t expected = 0;
    for (const auto& d : space.items()) {
      bool hit = false;
      for (const auto& [x, y] : d.pairs()) hit = hit || ((x & 1) == 0 && (y & 1) == 0);
      expected += hit;
    }
    CHECK(projector_rank(space, predicate_projector(space, predicates::dszs(1))) == expected);
    CHECK(projector_rank(space, predicate_projector(space, predicates::empty())) == 0);
  }
  {  // one-more with more pairs than any database holds annihilates the space
    for (Index q = 0; q <= 3; ++q) {
      DatabaseSpace space(DbKind::Injective, N, N, q);
      CHECK(projector_rank(space, predicate_projector(space, predicates::one_more(q + 1))) == 0);
    }
  }
  {  // union and hint handling
    const auto u = predicates::union_of(predicates::dm_zero_preimage(), predicates::dm_collision());
    for (const auto& d : dbs)
      CHECK(satisfies(u, d) == (satisfies(predicates::dm_zero_preimage(), d) || satisfies(predicates::dm_collision(), d)));
  }
  {  // searches without a length hint are capped
    Predicate nohint{"never", [](const PairList&) { return false; }, 1, std::nullopt, true, false};
    std::vector<std::pair<Index, Index>> pairs;
    for (Index x = 0; x < 10; ++x) pairs.emplace_back(x, x);
    CHECK_THROWS_AS(satisfies(nohint, Database::from_pairs(16, 16, pairs)), std::length_error);
  }
}

TEST_CASE("sparsity") {
  for (Index N : {4u, 8u}) {
    CAPTURE(N);
    for (Index t = 0; t <= 2; ++t) {
      CAPTURE(t);
      CHECK(brute_sparsity(predicates::dm_zero_preimage(), N, t).s_t == 1);
      const auto s = brute_sparsity(predicates::dm_collision(), N, t).s_t;
      CHECK(s == dm_collision_sparsity(N, t));
      CHECK(s <= t);
    }
  }
  // At N = 4 two disjoint xor classes cannot both land outside the image.
  CHECK(brute_sparsity(predicates::dm_collision(), 4, 2).s_t == 1);
  CHECK(brute_sparsity(predicates::dm_collision(), 8, 2).s_t == 2);
  for (unsigned n : {1u, 2u}) {
    const Index N = Index{1} << (2 * n), low = (Index{1} << n) - 1;
    std::set<std::pair<Index, Index>> pairs;
    for (Index x = 0; x < N; ++x)
      for (Index y = 0; y < N; ++y)
        if ((x & low) == 0 && (y & low) == 0) pairs.insert({x, y});
    for (Index t = 0; t <= 2; ++t) {
      CAPTURE(n);
      CAPTURE(t);
      const auto rep = brute_sparsity(predicates::dszs(n), N, t);
      CHECK(rep.s_t == single_pair_sparsity(pairs, N, t));
      CHECK(rep.s_t <= (Index{1} << n));
    }
  }
  {  // witness reproduces the reported count
    const auto rep = brute_sparsity(predicates::dm_collision(), 8, 2);
    std::size_t count = 0;
    for (Index v = 0; v < 8; ++v) {
      if (rep.forward ? rep.witness.in_image(v) : rep.witness.defined(v)) continue;
      const Database e = rep.forward ? assign(rep.witness, rep.point, v, DbKind::Injective)
                                     : assign(rep.witness, v, rep.point, DbKind::Injective);
      count += satisfies(predicates::dm_collision(), e);
    }
    CHECK(count == rep.count);
    CHECK(rep.to_json()["s_t"] == 2);
  }
  {  // the cycle predicate adds at most one cycle per new pair
    for (Index t = 0; t <= 2; ++t) CHECK(brute_sparsity(predicates::cycle(4), 4, t).s_t == 1);
  }
  {  // sponge predicates at (r, c) = (1, 1)
    const SpongeParams s{1, 1};
    const auto pre = predicates::union_of(sponge_internal_collision(s), sponge_preimage(s, 1));
    const auto col = predicates::union_of(sponge_internal_collision(s), sponge_collision(s));
    for (Index t = 0; t <= 2; ++t) {
      const auto a = brute_sparsity(pre, 4, t), b = brute_sparsity(col, 4, t);
      MESSAGE("sponge (1,1) t=" << t << " s_t(icol|pre)=" << a.s_t << " s_t(icol|col)=" << b.s_t);
      CHECK(a.s_t >= 1);
      CHECK(a.s_t <= 4);
      CHECK(b.s_t <= 4);
    }
  }
}

TEST_CASE("real and compressed games") {
  {  // blind guess of one pair: 1/N in the real game, 0 in the compressed one
    for (Index N : {2u, 4u}) {
      const auto layout = permutation_adversary_layout(N, 1, 1);
      const auto adv = guessing_adversary(layout, 0, {{1, N - 1}});
      CHECK(play_real_game(predicates::single_pair(), adv, N, 1).value == doctest::Approx(1.0 / N).epsilon(1e-12));
      CHECK(play_real_game(predicates::one_more(1), adv, N, 1).value == doctest::Approx(1.0 / N).epsilon(1e-12));
      CHECK(play_compressed_game(predicates::single_pair(), adv, N) == 0.0);
    }
  }
  {  // full probe with q = N - 1 queries wins one-more with certainty
    const auto adv = full_probe_adversary(4);
    CHECK(play_real_game(predicates::one_more(4), adv, 4, 4).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(play_compressed_game(predicates::one_more(4), adv, 4) == 0.0);
  }
  {  // one-more is never won in the compressed game
    for (Index N : {4u, 8u})
      for (std::size_t q = 1; q <= 3; ++q) {
        if (N == 8 && q == 3) continue;  // covered by the classical adversary below
        const auto layout = permutation_adversary_layout(N, 1, 0);
        CHECK(play_compressed_game(predicates::one_more(q + 1), random_adversary(layout, q, 700 + q), N) == 0.0);
      }
    const auto layout8 = permutation_adversary_layout(8, 1, 0);
    CHECK(play_compressed_game(predicates::one_more(4), classical_adversary(layout8, {1, 5, 2}, {0, 1, 0}), 8) == 0.0);
    CHECK(play_compressed_game(predicates::one_more(4), hadamard_adversary(layout8, 3, 5), 8) == 0.0);
  }
  {  // cycle after one classical forward query: weight of the fixed point in the database
    const Index N = 4, x = 2;
    const auto layout = permutation_adversary_layout(N, 1, 0);
    const auto adv = classical_adversary(layout, {x});
    const auto run = run_cp_experiment(PermOracleConfig{N, N}, adv, false);
    const DbCodec codec(N, N);
    const Index fixed = codec.encode(Database::from_pairs(N, N, {{x, x}}));
    double expected = 0;
    for (const auto& [i, a] : run.state.amplitudes())
      if (run.state.layout().digit(i, run.state.layout().position("D")) == fixed) expected += std::norm(a);
    CHECK(expected > 0);
    CHECK(play_compressed_game(predicates::cycle(N), adv, N) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(play_compressed_game(predicates::empty(), adv, N) == 0.0);
  }
  {  // enumeration cap and Monte Carlo
    const auto layout = permutation_adversary_layout(8, 1, 1);
    const auto adv = guessing_adversary(layout, 0, {{3, 3}});
    CHECK_THROWS_AS(play_real_game(predicates::single_pair(), adv, 8, 1), std::length_error);
    GameOptions mc;
    mc.monte_carlo = true;
    mc.samples = 4000;
    mc.seed = 9;
    const auto res = play_real_game(predicates::single_pair(), adv, 8, 1, mc);
    CHECK_FALSE(res.exact);
    CHECK(std::abs(res.value - 0.125) < 4 * res.std_error);
  }
}

TEST_CASE("search bound") {
  struct Case {
    Predicate r;
    Index N;
    std::size_t q, l;
    std::uint64_t seed;
  };
  std::vector<Case> cases;
  const SpongeParams sp{1, 1};
  for (const auto& r : {predicates::single_pair(), predicates::dm_zero_preimage(), predicates::dszs(1),
                        predicates::cycle(4), sponge_preimage(sp, 1)})
    for (std::size_t q : {1u, 2u})
      for (std::uint64_t seed : {1u, 2u}) cases.push_back({r, 4, q, 1, 100 * q + seed});
  for (const auto& r : {predicates::one_more(2), predicates::dm_collision()})
    for (std::uint64_t seed : {1u, 2u}) cases.push_back({r, 4, 1, 2, 300 + seed});
  // N = 8 is exact over all 40320 permutations (about 12 s per case).
  cases.push_back({predicates::cycle(8), 8, 1, 1, 500});
  cases.push_back({predicates::dm_collision(), 8, 1, 2, 600});
  REQUIRE(cases.size() == 26);
  GameOptions opts;
  opts.exact_max_n = 8;
  for (const auto& c : cases) {
    const auto layout = permutation_adversary_layout(c.N, 1, c.l);
    const auto adv = random_adversary(layout, c.q, c.seed, c.l);
    const auto b = search_bound_check(c.r, adv, c.N, c.l, c.seed, opts);
    CAPTURE(b.csv_row());
    CHECK(b.holds());
    CHECK(b.slack == doctest::Approx(c.l / std::sqrt(double(c.N - c.q - c.l))));
  }
  {  // blind guesser: p2 = 0, slack l / sqrt(N - l)
    const auto layout = permutation_adversary_layout(4, 1, 1);
    const auto b = search_bound_check(predicates::single_pair(), guessing_adversary(layout, 0, {{0, 1}}), 4, 1);
    CHECK(b.p1 == doctest::Approx(0.25));
    CHECK(b.p2 == 0.0);
    CHECK(b.adv < 1e-12);
    CHECK(b.slack == doctest::Approx(1 / std::sqrt(3.0)));
    CHECK(b.holds());
  }
  {  // l = 0: no output, no slack, no view term
    const auto layout = permutation_adversary_layout(4, 1, 0);
    const auto b = search_bound_check(predicates::single_pair(), random_adversary(layout, 1, 3), 4, 0);
    CHECK(b.p1 == 0.0);
    CHECK(b.slack == 0.0);
    CHECK(b.adv == 0.0);
    CHECK(b.holds());
  }
  {  // CSV layout and argument checks
    CHECK(search_bound_csv_header() == "predicate,N,q,l,p1,p2,bound_rhs,seed");
    SearchBound b;
    b.predicate = "cycle";
    b.N = 4;
    b.q = 1;
    b.l = 1;
    b.p1 = 0.5;
    b.p2 = 0.25;
    b.bound_rhs = 1;
    b.seed = 7;
    CHECK(b.csv_row() == "cycle,4,1,1,0.5,0.25,1,7");
    const auto layout = permutation_adversary_layout(4, 1, 2);
    CHECK_THROWS_AS(search_bound_check(predicates::one_more(2), random_adversary(layout, 2, 1, 2), 4, 2),
                    std::invalid_argument);
  }
}

TEST_CASE("modified compressions") {
  {  // cycle-free compression commutes with the cycle projector; pC does not
    const PermOracleConfig cfg{4, 4};
    const RegisterLayout layout({{"B", 2}, {"X", 4}, {"Y", 4}, {"D", cfg.codec().cardinality()}});
    const auto pi = predicate_projector(layout, cfg.codec(), predicates::cycle(4));
    const auto cols = query_columns(cfg, layout, 3);
    const auto ct = cycle_free_compression(cfg, layout);
    const auto f = build_flip(cfg, layout);
    CHECK(commutator_norm(pi, ct, cols) < 1e-10);
    CHECK(commutator_norm(pi, compose({f, ct, f}), cols) < 1e-10);
    CHECK(commutator_norm(pi, modified_cp(cfg, layout, ct, ct), cols) < 1e-10);
    CHECK(commutator_norm(pi, build_pc(cfg, layout), cols) > 0.1);
    const auto s = testutil::random_state_on(layout, {cols.begin(), cols.begin() + 200}, 3);
    CHECK(distance(ct.apply(ct.apply(s)), s) < 1e-12);
  }
  {  // closeness at t = 0 is the distance of the two completion states
    const double expected = std::sqrt(2 - 2 * std::sqrt(3.0 / 4.0));
    CHECK(compression_closeness(PermOracleConfig{4, 4}, CompressionVariant::CycleFree, 0) ==
          doctest::Approx(expected).epsilon(1e-12));
    for (Index N : {4u, 8u})
      for (Index t = 1; t <= 2; ++t) {
        const double c = compression_closeness(PermOracleConfig{N, N}, CompressionVariant::CycleFree, t);
        MESSAGE("cycle-free closeness N=" << N << " t=" << t << ": " << c << " (ratio "
                                          << c / std::sqrt(double(t) / double(N)) << ")");
        CHECK(c > 0);
        CHECK(c <= 2.0);
      }
  }
  {  // sparsity-restricted compressions commute with their predicate
    struct Item {
      Predicate r;
      Index N;
    };
    for (const auto& it : {Item{predicates::dszs(1), 4}, Item{predicates::dm_zero_preimage(), 4},
                           Item{predicates::dm_collision(), 4}, Item{predicates::dm_zero_preimage(), 8},
                           Item{predicates::dm_collision(), 8}}) {
      CAPTURE(it.r.name);
      CAPTURE(it.N);
      const PermOracleConfig cfg{it.N, it.N};
      const Index t = it.N == 4 ? 3 : 1;
      if (it.N == 4) {
        const RegisterLayout layout({{"B", 2}, {"X", 4}, {"Y", 4}, {"D", cfg.codec().cardinality()}});
        const auto pi = predicate_projector(layout, cfg.codec(), it.r);
        const auto cols = query_columns(cfg, layout, t);
        const auto cf = sparsity_compression_forward(cfg, layout, it.r);
        const auto cb = sparsity_compression_backward(cfg, layout, it.r);
        const auto f = build_flip(cfg, layout);
        CHECK(commutator_norm(pi, cf, cols) < 1e-10);
        CHECK(commutator_norm(pi, compose({f, cb, f}), cols) < 1e-10);
        CHECK(commutator_norm(pi, modified_cp(cfg, layout, cf, cb), cols) < 1e-10);
      } else {
        const RegisterLayout layout({{"X", it.N}, {"D", cfg.codec().cardinality()}});
        std::vector<Index> cols;
        const DatabaseSpace space(DbKind::Injective, it.N, it.N, 2);
        for (Index raw : space.raws())
          for (Index x = 0; x < it.N; ++x) cols.push_back(layout.encode({x, raw}));
        const auto pi = predicate_projector(layout, cfg.codec(), it.r);
        const auto f = build_flip(cfg, layout);
        CHECK(commutator_norm(pi, sparsity_compression_forward(cfg, layout, it.r), cols) < 1e-10);
        CHECK(commutator_norm(pi, compose({f, sparsity_compression_backward(cfg, layout, it.r), f}), cols) < 1e-10);
      }
      for (Index tt = 1; tt <= 2; ++tt) {
        const double s = static_cast<double>(brute_sparsity(it.r, it.N, tt).s_t);
        const double cf = compression_closeness(cfg, CompressionVariant::SparsityForward, tt, it.r);
        const double cb = compression_closeness(cfg, CompressionVariant::SparsityBackward, tt, it.r);
        MESSAGE(it.r.name << " N=" << it.N << " t=" << tt << " closeness " << cf << " / " << cb << " ratio "
                          << std::max(cf, cb) / std::sqrt(s / it.N));
        CHECK(cf <= 2.0);
        CHECK(cb <= 2.0);
      }
    }
  }
}

TEST_CASE("sponge construction") {
  {  // identity permutation, one block: the digest is the block
    const SpongeParams s{2, 2};
    for (Index m = 0; m < 4; ++m) CHECK(sponge_eval(s, Permutation::identity(16), {m}) == m);
  }
  {  // hand trace at r = c = 1 with phi = [2, 0, 3, 1]
    const SpongeParams s{1, 1};
    const Permutation phi({2, 0, 3, 1});
    // [0, 1]: x1 = 00, u1 = 10; x2 = 10 xor 10 = 00, u2 = 10 -> rate 1.
    CHECK(sponge_eval(s, phi, {0, 1}) == 1);
    // [1, 0]: x1 = 10, u1 = 11; x2 = 11, u2 = 01 -> rate 0.
    CHECK(sponge_eval(s, phi, {1, 0}) == 0);
    CHECK_THROWS_AS(sponge_eval(s, phi, {}), std::invalid_argument);
    CHECK_THROWS_AS(sponge_eval(s, phi, {2}), std::invalid_argument);
  }
  {  // chains of random messages satisfy the preimage predicate of their digest
    Philox rng(77);
    for (const SpongeParams s : {SpongeParams{1, 1}, SpongeParams{2, 2}}) {
      for (int trial = 0; trial < 50; ++trial) {
        const Permutation phi = random_permutation(s.width(), rng);
        std::vector<Index> m(1 + rng.below(3));
        for (auto& b : m) b = rng.below(Index{1} << s.r);
        const PairList chain = sponge_chain(s, phi, m);
        const Index w = sponge_eval(s, phi, m);
        CHECK(sponge_preimage(s, w).decide(chain));
        CHECK_FALSE(sponge_preimage(s, w ^ 1).decide(chain));
        CHECK(sponge_message(s, chain) == m);
        CHECK(sponge_internal_preimage(s, s.capacity_of(chain.back().second)).decide(chain));
      }
    }
  }
  {  // predicate clauses
    const SpongeParams s{1, 1};
    const auto preds = sponge_predicates(s, 1, 1);
    CHECK(preds.preimage.decide({{0, 2}}));     // x capacity 0, y rate 1
    CHECK_FALSE(preds.preimage.decide({{1, 2}}));  // x capacity 1
    CHECK(preds.internal_preimage.decide({{2, 1}}));
    // A chain ending in capacity 0 is an internal collision on its own.
    CHECK(preds.internal_collision.decide({{0, 2}}));
    CHECK_FALSE(preds.internal_collision.decide({{0, 3}}));
    CHECK(preds.internal_collision.decide({{0, 3}, {2, 1}}));
    CHECK_FALSE(preds.internal_collision.decide({{0, 3}, {0, 3}}));
    // Collisions need two different chains with equal final rate.
    CHECK(preds.collision.decide({{0, 2}, {2, 3}}));
    CHECK_FALSE(preds.collision.decide({{0, 2}, {2, 1}}));
    CHECK_FALSE(preds.collision.decide({{0, 2}, {0, 2}}));
    CHECK_FALSE(preds.collision.decide({{0, 2}}));
    CHECK_THROWS_AS(sponge_message(s, {{1, 2}}), std::invalid_argument);
  }
}

TEST_CASE("Feistel distinguishers") {
  // Exact oracle: enumerate round functions with independent bit arithmetic.
  auto exact_xor_accept = [](unsigned n, unsigned rounds) {
    const Index h = Index{1} << n;
    std::vector<std::vector<Index>> fs;
    for (Index code = 0; code < static_cast<Index>(std::pow(double(h), double(h))); ++code) {
      std::vector<Index> g(h);
      Index c = code;
      for (Index k = 0; k < h; ++k) {
        g[k] = c % h;
        c /= h;
      }
      fs.push_back(g);
    }
    double acc = 0, total = 0;
    std::vector<std::size_t> digit(rounds, 0);
    while (true) {
      std::vector<std::vector<Index>> g;
      for (auto d : digit) g.push_back(fs[d]);
      const Index y = feistel_bits(n, g, 0), y2 = feistel_bits(n, g, h);
      acc += (((y ^ y2) & (h - 1)) == 1);
      total += 1;
      std::size_t pos = 0;
      while (pos < rounds && ++digit[pos] == fs.size()) digit[pos++] = 0;
      if (pos == rounds) break;
    }
    return acc / total;
  };
  {  // n = 1 exact values
    const auto r3 = distinguisher_suite(1, 3, "xor-statistic", 2);
    const auto r4 = distinguisher_suite(1, 4, "xor-statistic", 2);
    const auto r7 = distinguisher_suite(1, 7, "xor-statistic", 2);
    CHECK(r3.accept_uniform == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r3.accept_feistel == doctest::Approx(exact_xor_accept(1, 3)).epsilon(1e-12));
    CHECK(r7.accept_feistel == doctest::Approx(exact_xor_accept(1, 7)).epsilon(1e-12));
    CHECK(r3.advantage == doctest::Approx(1.0 / 24).epsilon(1e-12));
    CHECK(r3.permutation_tv == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(r4.permutation_tv == doctest::Approx(1.0 / 12).epsilon(1e-12));
    CHECK(r7.permutation_tv == doctest::Approx(1.0 / 96).epsilon(1e-12));
    // Every distinguisher is bounded by the permutation distance.
    for (const auto* r : {&r3, &r4, &r7}) {
      CHECK(r->advantage <= r->permutation_tv + 1e-12);
      CHECK(r->view_trace_distance <= r->permutation_tv + 1e-12);
      CHECK(r->advantage <= r->view_trace_distance + 1e-12);
    }
    CHECK(r7.permutation_tv <= r3.permutation_tv);
    CHECK(r3.advantage > r7.permutation_tv);
  }
  {  // superposition probes: Helstrom acceptance gap equals the view distance
    for (std::size_t q : {1u, 2u}) {
      const auto r7 = distinguisher_suite(1, 7, "superposition", q, 5);
      const auto r3 = distinguisher_suite(1, 3, "superposition", q, 5);
      MESSAGE("superposition q=" << q << " view distance 3 rounds " << r3.view_trace_distance << ", 7 rounds "
                                 << r7.view_trace_distance);
      CHECK(r7.advantage == doctest::Approx(r7.view_trace_distance).epsilon(1e-9));
      CHECK(r7.view_trace_distance <= r7.permutation_tv + 1e-12);
      CHECK(r3.view_trace_distance <= r3.permutation_tv + 1e-12);
      CHECK(r7.to_json()["attack"] == "superposition");
    }
  }
  {  // n = 2 sampling agrees with exact enumeration of the two outputs
    const auto rep = distinguisher_suite(2, 3, "xor-statistic", 2, 11, 20000);
    CHECK_FALSE(rep.exact);
    const double exact = [&] {
      // Only two inputs matter; enumerate all 3-round tuples at n = 2.
      const Index h = 4;
      double acc = 0, total = 0;
      std::vector<std::vector<Index>> fs;
      for (Index code = 0; code < 256; ++code) fs.push_back({code & 3, (code >> 2) & 3, (code >> 4) & 3, code >> 6});
      for (const auto& g1 : fs)
        for (const auto& g2 : fs)
          for (const auto& g3 : fs) {
            const Index y = feistel_bits(2, {g1, g2, g3}, 0), y2 = feistel_bits(2, {g1, g2, g3}, h);
            acc += (((y ^ y2) & 3) == 1);
            total += 1;
          }
      return acc / total;
    }();
    CHECK(rep.accept_uniform == doctest::Approx(4.0 / 15.0).epsilon(1e-12));
    const Estimate e = wilson_estimate(static_cast<std::size_t>(std::llround(rep.accept_feistel * 20000)), 20000, 3.5);
    CHECK(e.lo <= exact);
    CHECK(exact <= e.hi);
    CHECK(std::isnan(rep.permutation_tv));
  }
  {  // limits
    CHECK_THROWS_AS(distinguisher_suite(3, 3, "xor-statistic", 2), std::length_error);
    CHECK_THROWS_AS(distinguisher_suite(2, 3, "xor-statistic", 2, 0, kDistinguisherBudgetCap + 1), std::length_error);
    CHECK_THROWS_AS(distinguisher_suite(1, 3, "simon", 2), std::invalid_argument);
  }
}
