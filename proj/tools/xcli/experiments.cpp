// experiments.cpp

#include "experiments.hpp"

#include "qperm/cfo.hpp"
#include "qperm/mforacle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qperm::xcli {

namespace {

constexpr double kExactTol = 1e-10;

unsigned bits_of(Index N) {
  unsigned b = 0;
  while ((Index{1} << b) < N) ++b;
  if ((Index{1} << b) != N) throw std::invalid_argument("N must be a power of two");
  return b;
}

TwirlDistribution twirl_by_name(const std::string& name, unsigned n) {
  const FeistelParams p(n);
  if (name == "uniform") return TwirlDistribution::uniform(p);
  if (name == "feistel2-pair") return TwirlDistribution::feistel2_pair(p);
  throw std::invalid_argument("unknown twirl '" + name + "' (uniform | feistel2-pair)");
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out + "\n";
}

// ---- verify ---------------------------------------------------------------

ExperimentResult cfo_soundness(const ExperimentConfig& c) {
  FunctionOracleConfig cfg{c.M, c.N, c.M};
  const auto adv = random_adversary(function_adversary_layout(c.M, c.N, 2, 0), c.q, c.seed_or_zero());
  const double td = trace_distance(run_standard_experiment(cfg, adv, c.seed_or_zero(), c.budget).rho,
                                   run_compressed_experiment(cfg, adv).view);
  ExperimentResult r;
  r.values = {{"trace_distance", td}, {"tolerance", 1e-9}};
  r.pass = td <= 1e-9;
  return r;
}

ExperimentResult cfo_bounded_growth(const ExperimentConfig& c) {
  FunctionOracleConfig cfg{c.M, c.N, std::min<Index>(c.M, c.q + 1)};
  const auto run =
      run_compressed_experiment(cfg, random_adversary(function_adversary_layout(c.M, c.N, 2, 0), c.q, c.seed_or_zero()),
                                false);
  const double out = amplitude_outside(run.state, cfg.codec(), c.q);
  ExperimentResult r;
  r.values = {{"amplitude_outside", out}, {"norm", run.state.norm()}};
  r.pass = out <= 1e-12;
  return r;
}

ExperimentResult cpo_bounded_growth(const ExperimentConfig& c) {
  PermOracleConfig cfg{c.N, std::min<Index>(c.N, c.q)};
  const auto run =
      run_cp_experiment(cfg, random_adversary(permutation_adversary_layout(c.N, 0, 0), c.q, c.seed_or_zero()), false);
  const double out = amplitude_outside(run.state, cfg.codec(), c.q);
  ExperimentResult r;
  r.values = {{"amplitude_outside", out}, {"norm", run.state.norm()}};
  r.pass = out <= 1e-12;
  return r;
}

ExperimentResult lemma_result(const LemmaCheck& chk) {
  ExperimentResult r;
  r.values = {{"lhs", chk.lhs}, {"compressed", chk.compressed}, {"rhs", chk.rhs}};
  r.pass = chk.holds(1e-9);
  return r;
}

ExperimentResult cfo_fundamental_lemma(const ExperimentConfig& c) {
  FunctionOracleConfig cfg{c.M, c.N, c.M};
  const auto layout = function_adversary_layout(c.M, c.N, 0, c.l);
  return lemma_result(fundamental_lemma_check(cfg, random_adversary(layout, c.q, c.seed_or_zero(), c.l), c.l));
}

ExperimentResult cpo_fundamental_lemma(const ExperimentConfig& c) {
  PermOracleConfig cfg{c.N, c.N};
  const auto layout = permutation_adversary_layout(c.N, 0, c.l);
  return lemma_result(perm_fundamental_lemma_check(cfg, random_adversary(layout, c.q, c.seed_or_zero(), c.l), c.l));
}

ExperimentResult chain_census_verify(const ExperimentConfig& c) {
  const FeistelParams p(c.n);
  const Index H = p.half();
  std::vector<CensusRow> rows;
  ExperimentResult r;
  r.values["rows"] = nlohmann::json::array();
  for (Index t = 0; t <= c.t; ++t) {
    const CensusRow row = chain_census(p, t);
    const bool ok = row.triples == 0 || (row.uniform && row.leftward_matches && row.chains == t && row.semi2 == t * (t > 0 ? t - 1 : 0) &&
                    row.semi1 == t * (H - t) && row.semi0 == (H - t) * H &&
                    row.chains + row.semi2 + row.semi1 + row.semi0 == p.size());
    r.pass = r.pass && ok;
    r.values["rows"].push_back({{"t", t},
                                {"triples", row.triples},
                                {"chains", row.chains},
                                {"semi2", row.semi2},
                                {"semi1", row.semi1},
                                {"semi0", row.semi0},
                                {"vacuous", row.triples == 0},
                                {"matches", ok}});
    rows.push_back(row);
  }
  r.csv = census_csv(rows);
  return r;
}

ExperimentResult counting_lemma(const ExperimentConfig& c) {
  const FeistelParams p(c.n);
  const Index H = p.half();
  Philox rng(c.seed_or_zero());
  ExperimentResult r;
  r.values["sizes"] = nlohmann::json::array();
  r.csv = csv_line({"t", "databases", "extensions", "binomial", "falling_factorial"});
  for (Index t = 0; t <= c.t; ++t) {
    std::vector<Database> dbs = allowable_databases(p, t);
    const std::size_t total = dbs.size();
    if (c.n > 1 && dbs.size() > 100) {  // sample 100 without replacement
      std::shuffle(dbs.begin(), dbs.end(), rng);
      dbs.resize(100);
    }
    Index falling = 1;
    for (Index k = 0; k < t; ++k) falling *= H - k;
    const Index binom = binomial(H, t);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& i : dbs) {
      const std::size_t d = extend_database_all(p, i).size();
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const bool has = !dbs.empty();
    const bool binom_ok = !has || (lo == binom && hi == binom);
    const bool falling_ok = !has || (lo == falling && hi == falling);
    r.pass = r.pass && binom_ok;
    r.values["sizes"].push_back({{"t", t},
                                 {"allowable", total},
                                 {"checked", dbs.size()},
                                 {"extensions_min", has ? lo : 0},
                                 {"extensions_max", hi},
                                 {"binomial", binom},
                                 {"falling_factorial", falling},
                                 {"binomial_holds", binom_ok},
                                 {"falling_factorial_holds", falling_ok}});
    r.csv += csv_line({std::to_string(t), std::to_string(dbs.size()), std::to_string(hi), std::to_string(binom),
                       std::to_string(falling)});
  }
  return r;
}

ExperimentResult canonical_decompression(const ExperimentConfig& c) {
  const FeistelParams p(c.n);
  if (c.n != 1) throw std::length_error("canonical decompression is checked at n = 1 only");
  const auto layout = triple_layout(p);
  double worst = 0;
  std::size_t cases = 0;
  for (Index s = 0; s <= std::min<Index>(c.t, 1); ++s)
    for (const auto& a : allowable_databases(p, s))
      for (Index u = 0; u < p.size(); ++u) {
        if (a.defined(u) || !allows(p, a, u)) continue;
        const auto g = canonical_compression_ops(p, layout, u, a.size() + 1);
        const auto lhs = g.decompression().apply(canonical_superposition(p, layout, a));
        const auto vs = allowed_values(p, a, u).values;
        SparseState rhs(layout);
        for (Index v : vs) rhs += canonical_superposition(p, layout, assign(a, u, v, DbKind::Injective));
        rhs *= 1.0 / std::sqrt(static_cast<double>(vs.size()));
        worst = std::max(worst, distance(lhs, rhs));
        ++cases;
      }
  ExperimentResult r;
  r.values = {{"max_deviation", worst}, {"cases", cases}};
  r.pass = worst <= kExactTol;
  return r;
}

// Random superposition of sophisticated states plus its images under
// mfC^dagger and ctrl-mfF mfC^dagger.
SparseState sophisticated_test_state(const SophisticatedBasis& basis, const MfOperators& mf, std::uint64_t seed) {
  Philox rng(seed);
  const RegisterLayout& adv = basis.space().adversary();
  SparseState s(basis.space().layout());
  for (int k = 0; k < 2; ++k) {
    const Index rest = rng.below(adv.dimension());
    for (std::size_t id = 0; id < basis.databases().size(); ++id)
      basis.add_state(s, rest, static_cast<int>(id), cplx(standard_normal(rng), standard_normal(rng)));
  }
  SparseState out = s + mf.mfC_dag.apply(s) + cplx(0.5, 0) * mf.ctrl_mfF.apply(mf.mfC_dag.apply(s));
  return out.normalized();
}

ExperimentResult sophisticated_identities(const ExperimentConfig& c) {
  if (c.n != 1) throw std::length_error("purification spaces exist only at n = 1");
  const FeistelParams p(1);
  const auto dist = twirl_by_name(c.twirl, 1);
  PurificationSpace space(p, permutation_adversary_layout(4, 1, 0), 2, true);
  const auto mf = build_mf_operators(space);
  const auto br = build_branch_operators(space);
  SophisticatedBasis basis(space, dist);
  const auto proj = build_subspace_projectors(basis);
  const auto ideal = build_ideal_operators(basis);
  const auto inter = build_intertwiner(basis);
  const auto s1 = sophisticated_test_state(basis, mf, c.seed_or_zero());

  double ortho = 0;
  for (std::size_t a = 0; a < basis.databases().size(); ++a)
    for (std::size_t b = 0; b < basis.databases().size(); ++b) {
      const cplx ip = basis.state(basis.databases()[a], 3).inner(basis.state(basis.databases()[b], 3));
      ortho = std::max(ortho, std::abs(ip - cplx(a == b ? 1.0 : 0.0, 0)));
    }
  const auto soph = proj.soph.apply(s1), ele = proj.ele.apply(s1), fele = proj.fele.apply(s1);
  nlohmann::json dev = {
      {"orthonormality", ortho},
      {"intertwiner_isometry", distance(inter.apply_adjoint(inter.apply(s1)), s1)},
      {"intertwiner_flip", distance(br.F.apply(inter.apply(soph)), inter.apply(mf.mfF.apply(soph)))},
      {"intertwiner_query", distance(br.P.apply(inter.apply(soph)), inter.apply(mf.mfP.apply(soph)))},
      {"intertwiner_compression", distance(inter.apply(ideal.mfC_bar.apply_adjoint(ele)), br.pC.apply_adjoint(inter.apply(ele)))},
      {"ideal_elegant_interchange",
       distance(proj.ele.apply(ideal.mfC_bar.apply(s1)), ideal.mfC_bar.apply(proj.indb.apply(soph)))},
      {"ideal_oracle_intertwining", distance(inter.apply(ideal.cmfO_bar.apply(fele)), br.cP.apply(inter.apply(fele)))},
  };
  std::vector<SparseState> ele_span, undefined_span;
  for (Index rest = 0; rest < space.adversary().dimension(); ++rest) {
    const Index x = space.adversary().digit(rest, space.adversary().position("X"));
    for (const auto& i : basis.databases()) {
      auto st = basis.state(i, rest);
      if (!i.defined(x)) undefined_span.push_back(st);
      auto e = proj.ele.apply(st);
      if (e.norm() > 1e-12) ele_span.push_back(e);
    }
  }
  const double ideal_gap = operator_norm_on_span(ideal.mfC_bar - mf.mfC_dag, ele_span);
  const double heart_gap = operator_norm_on_span(LinearOp::identity(space.layout()) - proj.heart, undefined_span);
  ExperimentResult r;
  double worst = 0;
  for (const auto& [k, v] : dev.items()) worst = std::max(worst, v.get<double>());
  r.values = {{"deviations", dev},
              {"max_deviation", worst},
              {"weights", {{"elegant", ele.norm()}, {"fully_elegant", fele.norm()}}},
              {"ideal_vs_real_decompression", ideal_gap},
              {"heart_gentleness", heart_gap}};
  r.pass = worst <= kExactTol && ele.norm() > 0.05 && fele.norm() > 0.05;
  r.frozen = {{"ideal_vs_real_decompression", ideal_gap}, {"heart_gentleness", heart_gap}};
  return r;
}

ExperimentResult one_more_verify(const ExperimentConfig& c) {
  const auto layout = permutation_adversary_layout(c.N, 1, 0);
  const auto r1 = predicates::one_more(c.q + 1);
  std::vector<Index> xs, bs;
  for (std::size_t k = 0; k < c.q; ++k) {
    xs.push_back(k % c.N);
    bs.push_back(k % 2);
  }
  const double pr = play_compressed_game(r1, random_adversary(layout, c.q, c.seed_or_zero()), c.N);
  const double ph = play_compressed_game(r1, hadamard_adversary(layout, c.q, c.seed_or_zero()), c.N);
  const double pc = play_compressed_game(r1, classical_adversary(layout, xs, bs), c.N);
  ExperimentResult r;
  r.values = {{"random", pr}, {"hadamard", ph}, {"classical", pc}};
  r.pass = pr == 0.0 && ph == 0.0 && pc == 0.0;
  return r;
}

ExperimentResult sparsity_verify(const ExperimentConfig& c) {
  const Predicate pred = predicate_by_name(c.predicate, c.N);
  ExperimentResult r;
  r.values["rows"] = nlohmann::json::array();
  r.csv = csv_line({"predicate", "N", "t", "s_t", "claim"});
  for (Index t = 0; t <= c.t; ++t) {
    const auto rep = brute_sparsity(pred, c.N, t);
    std::string claim = "none";
    bool ok = true;
    if (pred.name == "dm-zero-preimage") {
      claim = "s_t = 1";
      ok = rep.s_t == 1;
    } else if (pred.name == "dm-collision") {
      claim = "s_t = t";
      ok = rep.s_t == t;
    } else if (pred.name.rfind("dszs", 0) == 0) {
      const Index bound = Index{1} << (bits_of(c.N) / 2);
      claim = "s_t <= " + std::to_string(bound);
      ok = rep.s_t <= bound;
    }
    r.pass = r.pass && ok;
    auto row = rep.to_json();
    row["claim"] = claim;
    row["holds"] = ok;
    r.values["rows"].push_back(row);
    r.csv += csv_line({pred.name, std::to_string(c.N), std::to_string(t), std::to_string(rep.s_t), claim});
  }
  return r;
}

struct Commutators {
  double compression = 0, flipped = 0, modified_cp = 0;
};

Commutators commutators(const ExperimentConfig& c, const Predicate& pred) {
  const PermOracleConfig cfg{c.N, c.N};
  const bool cycle = c.variant == "cycle-free";
  Commutators out;
  if (c.N <= 4) {
    const RegisterLayout layout({{"B", 2}, {"X", c.N}, {"Y", c.N}, {"D", cfg.codec().cardinality()}});
    const auto pi = predicate_projector(layout, cfg.codec(), pred);
    const auto cols = query_columns(cfg, layout, std::min<Index>(c.t, c.N - 1));
    const auto cf = cycle ? cycle_free_compression(cfg, layout) : sparsity_compression_forward(cfg, layout, pred);
    const auto cb = cycle ? cf : sparsity_compression_backward(cfg, layout, pred);
    const auto f = build_flip(cfg, layout);
    out.compression = commutator_norm(pi, cf, cols);
    out.flipped = commutator_norm(pi, compose({f, cb, f}), cols);
    out.modified_cp = commutator_norm(pi, modified_cp(cfg, layout, cf, cb), cols);
  } else {
    const RegisterLayout layout({{"X", c.N}, {"D", cfg.codec().cardinality()}});
    const DatabaseSpace space(DbKind::Injective, c.N, c.N, std::min<Index>(c.t, 2));
    std::vector<Index> cols;
    for (Index raw : space.raws())
      for (Index x = 0; x < c.N; ++x) cols.push_back(layout.encode({x, raw}));
    const auto pi = predicate_projector(layout, cfg.codec(), pred);
    const auto cf = cycle ? cycle_free_compression(cfg, layout) : sparsity_compression_forward(cfg, layout, pred);
    const auto cb = cycle ? cf : sparsity_compression_backward(cfg, layout, pred);
    const auto f = build_flip(cfg, layout);
    out.compression = commutator_norm(pi, cf, cols);
    out.flipped = commutator_norm(pi, compose({f, cb, f}), cols);
    out.modified_cp = std::nan("");
  }
  return out;
}

Predicate variant_predicate(const ExperimentConfig& c) {
  if (c.variant == "cycle-free") return predicates::cycle(c.N);
  if (c.variant == "sparsity") return predicate_by_name(c.predicate, c.N);
  throw std::invalid_argument("unknown variant '" + c.variant + "' (cycle-free | sparsity)");
}

ExperimentResult compression_commutation(const ExperimentConfig& c) {
  const Predicate pred = variant_predicate(c);
  const auto m = commutators(c, pred);
  ExperimentResult r;
  r.values = {{"predicate", pred.name},
              {"compression", m.compression},
              {"flipped_compression", m.flipped},
              {"modified_cp", number(m.modified_cp)}};
  r.pass = m.compression <= kExactTol && m.flipped <= kExactTol && !(m.modified_cp > kExactTol);
  return r;
}

ExperimentResult search_bound_verify(const ExperimentConfig& c) {
  const Predicate pred = predicate_by_name(c.predicate, c.N);
  GameOptions opts;
  opts.exact_max_n = 8;
  opts.monte_carlo = true;
  opts.samples = c.budget;
  opts.seed = c.seed_or_zero();
  const auto layout = permutation_adversary_layout(c.N, 1, c.l);
  const auto b = search_bound_check(pred, random_adversary(layout, c.q, c.seed_or_zero(), c.l), c.N, c.l,
                                    c.seed_or_zero(), opts);
  ExperimentResult r;
  r.values = {{"p1", b.p1}, {"p2", b.p2}, {"slack", b.slack}, {"adv", b.adv}, {"bound_rhs", b.bound_rhs},
              {"holds", b.holds()}};
  r.pass = b.holds();
  r.csv = search_bound_csv_header() + "\n" + b.csv_row() + "\n";
  return r;
}

// ---- experiment -----------------------------------------------------------

ExperimentResult cpo_distance(const ExperimentConfig& c) {
  PermOracleConfig cfg{c.N, c.N};
  const auto adv = random_adversary(permutation_adversary_layout(c.N, 0, 0), c.q, c.seed_or_zero());
  const double td = trace_distance(run_perm_standard_experiment(cfg, adv, 8).rho, run_cp_experiment(cfg, adv).view);
  ExperimentResult r;
  r.values = {{"trace_distance", td}};
  r.frozen = {{"trace_distance", td}};
  return r;
}

ExperimentResult feistel_distance(const ExperimentConfig& c) {
  if (c.n != 1) throw std::length_error("exact Feistel distances are available at n = 1 only");
  const auto rep = distinguisher_suite(1, c.rounds, "superposition", c.q, c.seed_or_zero());
  ExperimentResult r;
  r.values = {{"view_trace_distance", rep.view_trace_distance}, {"permutation_tv", rep.permutation_tv}};
  r.frozen = {{"view_trace_distance", rep.view_trace_distance}, {"permutation_tv", rep.permutation_tv}};
  return r;
}

ExperimentResult soundness(const ExperimentConfig& c) {
  const auto dist = twirl_by_name(c.twirl, c.n);
  const auto adv = random_adversary(permutation_adversary_layout(4, 1, 0), c.q, c.seed_or_zero());
  const auto rep = run_soundness_experiment(dist, adv, c.seed_or_zero());
  ExperimentResult r;
  r.values = rep.values;
  r.values["ci"] = rep.ci;
  for (const auto& [k, v] : rep.values.items()) {
    if (v.is_number()) r.frozen.emplace_back(k, v.get<double>());
    if (v.is_array())
      for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i].is_number()) r.frozen.emplace_back(k + "[" + std::to_string(i) + "]", v[i].get<double>());
  }
  r.pass = rep.values.value("cmfo_vs_masked", 0.0) < kExactTol;
  return r;
}

ExperimentResult compression_closeness_exp(const ExperimentConfig& c) {
  const Predicate pred = variant_predicate(c);
  const PermOracleConfig cfg{c.N, c.N};
  ExperimentResult r;
  double value = 0, s = 0;
  if (c.variant == "cycle-free") {
    value = compression_closeness(cfg, CompressionVariant::CycleFree, c.t);
    s = static_cast<double>(c.t);
    r.values = {{"closeness", value}};
  } else {
    const double f = compression_closeness(cfg, CompressionVariant::SparsityForward, c.t, pred);
    const double b = compression_closeness(cfg, CompressionVariant::SparsityBackward, c.t, pred);
    value = std::max(f, b);
    s = static_cast<double>(brute_sparsity(pred, c.N, c.t).s_t);
    r.values = {{"forward", f}, {"backward", b}, {"closeness", value}, {"s_t", s}};
  }
  const double ratio = s > 0 ? value / std::sqrt(s / static_cast<double>(c.N)) : std::nan("");
  r.values["predicate"] = pred.name;
  r.values["ratio"] = number(ratio);
  r.frozen = {{"closeness", value}};
  if (std::isfinite(ratio)) r.frozen.emplace_back("ratio", ratio);
  return r;
}

ExperimentResult restricted_closeness(const ExperimentConfig& c) {
  FunctionOracleConfig cfg{c.M, c.N, std::min<Index>(c.M, c.t + 1)};
  const double d = compression_distance(cfg, c.x, values_outside_image(), c.t);
  const double ratio = c.t > 0 ? d / std::sqrt(static_cast<double>(c.t) / static_cast<double>(c.N)) : std::nan("");
  ExperimentResult r;
  r.values = {{"distance", d}, {"ratio", number(ratio)}};
  r.frozen = {{"distance", d}};
  return r;
}

ExperimentResult canonical_closeness(const ExperimentConfig& c) {
  if (c.n != 1) throw std::length_error("canonical closeness is computed at n = 1 only");
  const FeistelParams p(1);
  const auto layout = triple_layout(p);
  const auto cols = triple_columns(p, layout, c.t);
  double worst = 0;
  for (Index u = 0; u < p.size(); ++u) {
    const auto g = canonical_compression_ops(p, layout, u, c.t + 1).compression();
    const auto s = standard_compression_ops(p, layout, u, c.t + 1).compression();
    worst = std::max(worst, restricted_operator_norm(g - s, cols));
  }
  ExperimentResult r;
  r.values = {{"max_norm", worst}};
  r.frozen = {{"max_norm", worst}};
  return r;
}

ExperimentResult real_game(const ExperimentConfig& c) {
  const Predicate pred = predicate_by_name(c.predicate, c.N);
  GameOptions opts;
  opts.exact_max_n = 8;
  opts.monte_carlo = true;
  opts.samples = c.budget;
  opts.seed = c.seed_or_zero();
  const auto adv = random_adversary(permutation_adversary_layout(c.N, 1, c.l), c.q, c.seed_or_zero(), c.l);
  const auto g = play_real_game(pred, adv, c.N, c.l, opts);
  ExperimentResult r;
  r.values = {{"p1", g.value}, {"std_error", g.std_error}, {"exact", g.exact}, {"samples", g.samples},
              {"p2", play_compressed_game(pred, adv, c.N)}};
  if (g.exact) r.frozen = {{"p1", g.value}};
  return r;
}

// ---- enumerate ------------------------------------------------------------

ExperimentResult enumerate_databases_exp(const ExperimentConfig& c) {
  DbKind kind;
  if (c.kind == "injective")
    kind = DbKind::Injective;
  else if (c.kind == "function")
    kind = DbKind::Function;
  else
    throw std::invalid_argument("unknown database kind '" + c.kind + "' (function | injective)");
  std::vector<std::size_t> starts;
  const auto items = enumerate_databases(kind, c.M, c.N, c.t, kDefaultSpaceCap, &starts);
  ExperimentResult r;
  r.values["counts"] = nlohmann::json::array();
  for (std::size_t s = 0; s + 1 < starts.size(); ++s) r.values["counts"].push_back(starts[s + 1] - starts[s]);
  r.values["total"] = items.size();
  r.csv = csv_line({"size", "database"});
  for (const auto& d : items) r.csv += std::to_string(d.size()) + ",\"" + d.to_text() + "\"\n";
  return r;
}

ExperimentResult enumerate_allowable(const ExperimentConfig& c) {
  const FeistelParams p(c.n);
  ExperimentResult r;
  r.values["counts"] = nlohmann::json::array();
  r.csv = csv_line({"size", "database"});
  for (Index t = 0; t <= c.t; ++t) {
    const auto dbs = allowable_databases(p, t);
    r.values["counts"].push_back({{"t", t}, {"allowable", dbs.size()}, {"injective", injective_databases(p, t).size()}});
    for (const auto& d : dbs) r.csv += std::to_string(t) + ",\"" + d.to_text() + "\"\n";
  }
  return r;
}

ExperimentResult enumerate_canonical(const ExperimentConfig& c) {
  const FeistelParams p(c.n);
  ExperimentResult r;
  r.values["counts"] = nlohmann::json::array();
  r.csv = csv_line({"t", "canonical_triples"});
  for (Index t = 0; t <= c.t; ++t) {
    const std::size_t k = canonical_triples(p, t).size();
    r.values["counts"].push_back({{"t", t}, {"canonical_triples", k}});
    r.csv += csv_line({std::to_string(t), std::to_string(k)});
  }
  return r;
}

ExperimentResult enumerate_sparsity(const ExperimentConfig& c) {
  const Predicate pred = predicate_by_name(c.predicate, c.N);
  ExperimentResult r;
  r.values["rows"] = nlohmann::json::array();
  r.csv = csv_line({"t", "s_t", "direction", "point", "witness"});
  for (Index t = 0; t <= c.t; ++t) {
    const auto rep = brute_sparsity(pred, c.N, t);
    r.values["rows"].push_back(rep.to_json());
    r.csv += std::to_string(t) + "," + std::to_string(rep.s_t) + "," + (rep.forward ? "forward" : "backward") + "," +
             std::to_string(rep.point) + ",\"" + rep.witness.to_text() + "\"\n";
  }
  return r;
}

// ---- cromulence / distinguish ---------------------------------------------

ExperimentResult cromulence(const ExperimentConfig& c) {
  const auto dist = twirl_by_name(c.twirl, c.n);
  const FeistelParams p(c.n);
  const Database i = parse_pairs(c.pairs, p.size());
  const auto rep = estimate_cromulence(dist, i, c.x, c.budget, c.seed_or_zero());
  const double target = 1.0 / static_cast<double>(p.half());
  const auto& lm = rep.left_marginal;
  bool ok;
  double sigma = 0;
  if (lm.exact) {
    ok = std::abs(lm.value - target) <= 1e-12;
  } else {
    sigma = std::sqrt(target * (1 - target) / static_cast<double>(lm.trials));
    ok = std::abs(lm.value - target) <= 3 * sigma;
  }
  ExperimentResult r;
  r.values = rep.to_json();
  r.values["target_left_marginal"] = target;
  r.values["sigma"] = sigma;
  r.values["condition_holds"] = ok;
  r.pass = ok;
  if (lm.exact && std::isfinite(lm.value)) r.frozen = {{"left_marginal", lm.value}, {"joint", rep.joint.value}};
  return r;
}

ExperimentResult distinguish(const ExperimentConfig& c) {
  const auto rep = distinguisher_suite(c.n, c.rounds, c.attack, c.q, c.seed_or_zero(), c.budget);
  ExperimentResult r;
  r.values = rep.to_json();
  if (rep.exact) {
    r.frozen = {{"advantage", rep.advantage}};
    if (std::isfinite(rep.view_trace_distance)) r.frozen.emplace_back("view_trace_distance", rep.view_trace_distance);
    if (std::isfinite(rep.permutation_tv)) r.frozen.emplace_back("permutation_tv", rep.permutation_tv);
  }
  return r;
}

ExperimentResult frozen_suite_exp(const ExperimentConfig& c) {
  FixtureStore store = FixtureStore::load(c.fixture_file);
  const FixtureMode mode = c.fixtures == FixtureMode::Off ? FixtureMode::Assert : c.fixtures;
  const auto out = run_frozen_suite(store, mode, c.force);
  if (mode == FixtureMode::Record) store.save(c.fixture_file);
  ExperimentResult r;
  r.values = out.to_json();
  r.pass = out.failed == 0;
  return r;
}

std::vector<Experiment> build_catalog() {
  const std::vector<std::string> fn = {"M", "N", "q", "seed"}, perm = {"N", "q", "seed"};
  return {
      {"cfo-soundness", "verify", "compressed function oracle: standard and compressed views coincide",
       "cfo.run_compressed_experiment", false, fn, cfo_soundness},
      {"cfo-bounded-growth", "verify", "compressed function oracle: q queries reach databases of size <= q",
       "cfo.amplitude_outside", false, fn, cfo_bounded_growth},
      {"cpo-bounded-growth", "verify", "compressed permutation oracle: q queries reach databases of size <= q",
       "cpo.run_cp_experiment", false, perm, cpo_bounded_growth},
      {"cfo-fundamental-lemma", "verify", "function oracle fundamental lemma", "cfo.fundamental_lemma_check", false,
       {"M", "N", "q", "l", "seed"}, cfo_fundamental_lemma},
      {"cpo-fundamental-lemma", "verify", "permutation oracle fundamental lemma", "cpo.perm_fundamental_lemma_check",
       false, {"N", "q", "l", "seed"}, cpo_fundamental_lemma},
      {"chain-census", "verify", "chain and semi-chain census of canonical triples", "feistel_core.chain_census", false,
       {"n", "t"}, chain_census_verify},
      {"counting-lemma", "verify", "number of canonical triples supporting an allowable database",
       "feistel_core.extend_database_all", false, {"n", "t", "seed"}, counting_lemma},
      {"canonical-decompression", "verify", "canonical decompression of canonical superpositions",
       "feistel_core.canonical_compression_ops", false, {"n", "t"}, canonical_decompression},
      {"sophisticated-identities", "verify", "sophisticated states, intertwiner and ideal operator identities",
       "mforacle.build_intertwiner", false, {"twirl", "seed"}, sophisticated_identities},
      {"one-more", "verify", "one-more problem: the compressed game is never won", "games.play_compressed_game", false,
       perm, one_more_verify},
      {"sparsity", "verify", "sparsity of search predicates", "games.brute_sparsity", false, {"predicate", "N", "t"},
       sparsity_verify},
      {"compression-commutation", "verify", "modified compressions commute with the predicate projector",
       "games.commutator_norm", false, {"variant", "predicate", "N", "t"}, compression_commutation},
      {"search-bound", "verify", "predicate search bound for real versus compressed games",
       "games.search_bound_check", false, {"predicate", "N", "q", "l", "seed", "budget"}, search_bound_verify},
      {"frozen-suite", "verify", "frozen regression values", "xcli.run_frozen_suite", false, {}, frozen_suite_exp},
      {"cpo-distance", "experiment", "compressed permutation oracle versus a uniform permutation",
       "cpo.run_perm_standard_experiment", false, perm, cpo_distance},
      {"feistel-distance", "experiment", "Feistel network versus a uniform permutation",
       "games.distinguisher_suite", false, {"n", "rounds", "q", "seed"}, feistel_distance},
      {"soundness", "experiment", "masked Feistel soundness and per-query hybrids", "mforacle.run_soundness_experiment",
       true, {"twirl", "n", "q", "seed"}, soundness},
      {"compression-closeness", "experiment", "closeness of modified and original compressions",
       "games.compression_closeness", false, {"variant", "predicate", "N", "t"}, compression_closeness_exp},
      {"restricted-closeness", "experiment", "closeness of restricted function-oracle compressions",
       "cfo.compression_distance", false, {"M", "N", "t", "x"}, restricted_closeness},
      {"canonical-closeness", "experiment", "closeness of canonical and standard triple compressions",
       "feistel_core.canonical_compression_ops", false, {"n", "t"}, canonical_closeness},
      {"real-game", "experiment", "real and compressed predicate search games", "games.play_real_game", false,
       {"predicate", "N", "q", "l", "seed", "budget"}, real_game},
      {"databases", "enumerate", "partial function and injective database spaces", "databases.enumerate_databases",
       false, {"kind", "M", "N", "t"}, enumerate_databases_exp},
      {"allowable", "enumerate", "allowable injective databases", "feistel_core.allowable_databases", false,
       {"n", "t"}, enumerate_allowable},
      {"canonical-triples", "enumerate", "canonical round-database triples", "feistel_core.canonical_triples", false,
       {"n", "t"}, enumerate_canonical},
      {"sparsity-table", "enumerate", "sparsity per database size with witnesses", "games.brute_sparsity", false,
       {"predicate", "N", "t"}, enumerate_sparsity},
      {"cromulence", "cromulence", "twirl cromulence conditions", "mforacle.estimate_cromulence", true,
       {"twirl", "n", "pairs", "x", "budget", "seed"}, cromulence},
      {"distinguish", "distinguish", "small-round Feistel distinguishers", "games.distinguisher_suite", true,
       {"attack", "n", "rounds", "q", "budget", "seed"}, distinguish},
  };
}

}  // namespace

const std::vector<Experiment>& catalog() {
  static const std::vector<Experiment> cat = build_catalog();
  return cat;
}

const Experiment& find_experiment(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return e;
  throw std::invalid_argument("unknown experiment '" + name + "' (see list-experiments)");
}

nlohmann::json catalog_json() {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : catalog())
    out.push_back({{"name", e.name},
                   {"kind", e.kind},
                   {"anchor", e.anchor},
                   {"operation", e.operation},
                   {"stochastic", e.stochastic},
                   {"params", e.params}});
  return out;
}

void validate(const ExperimentConfig& cfg, const Experiment& e) {
  if (e.stochastic && !cfg.seed) throw std::invalid_argument("experiment '" + e.name + "' needs an explicit --seed");
  if (cfg.budget == 0) throw std::invalid_argument("budget must be positive");
  if (cfg.M == 0 || cfg.N == 0 || cfg.n == 0 || cfg.rounds == 0)
    throw std::invalid_argument("sizes and round counts must be positive");
}

nlohmann::json config_params(const ExperimentConfig& c, const Experiment& e) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& p : e.params) {
    if (p == "M") j[p] = c.M;
    else if (p == "N") j[p] = c.N;
    else if (p == "n") j[p] = c.n;
    else if (p == "q") j[p] = c.q;
    else if (p == "l") j[p] = c.l;
    else if (p == "t") j[p] = c.t;
    else if (p == "rounds") j[p] = c.rounds;
    else if (p == "x") j[p] = c.x;
    else if (p == "twirl") j[p] = c.twirl;
    else if (p == "predicate") j[p] = c.predicate;
    else if (p == "attack") j[p] = c.attack;
    else if (p == "variant") j[p] = c.variant;
    else if (p == "kind") j[p] = c.kind;
    else if (p == "pairs") j[p] = c.pairs;
    else if (p == "seed") j[p] = c.seed_or_zero();
    else if (p == "budget") j[p] = c.budget;
    else throw std::logic_error("unknown parameter " + p);
  }
  // The sparsity variant ignores the predicate for cycle-free runs.
  if (j.contains("variant") && c.variant == "cycle-free") j.erase("predicate");
  return j;
}

std::string fixture_key(const ExperimentConfig& cfg, const Experiment& e, const std::string& quantity) {
  std::string key = e.name + ":";
  bool first = true;
  const nlohmann::json params = config_params(cfg, e);
  for (const auto& [k, v] : params.items()) {
    key += (first ? "" : ",") + k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
    first = false;
  }
  return key + ":" + quantity;
}

nlohmann::json quantized(const nlohmann::json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) return nullptr;
    const double r = std::round(v * kReportScale) / kReportScale;
    return r == 0.0 ? 0.0 : r;  // no negative zero
  }
  if (!j.is_structured()) return j;
  nlohmann::json out = j;
  for (auto it = out.begin(); it != out.end(); ++it) *it = quantized(*it);
  return out;
}

nlohmann::json result_record(const ExperimentConfig& cfg, const Experiment& e, const ExperimentResult& r) {
  return {{"experiment", e.name}, {"params", config_params(cfg, e)}, {"pass", r.pass}, {"values", quantized(r.values)}};
}

Predicate predicate_by_name(const std::string& name, Index N) {
  const unsigned b = bits_of(N);
  if (name == "empty") return predicates::empty();
  if (name == "single-pair") return predicates::single_pair();
  if (name == "cycle") return predicates::cycle(N);
  if (name == "dm-zero-preimage") return predicates::dm_zero_preimage();
  if (name == "dm-collision") return predicates::dm_collision();
  if (name == "dszs") {
    if (b % 2 != 0) throw std::invalid_argument("dszs needs N = 4^n");
    return predicates::dszs(b / 2);
  }
  if (name == "sponge-preimage" || name == "sponge-collision") {
    if (b < 2) throw std::invalid_argument("sponge predicates need N >= 4");
    const SpongeParams s{b / 2, b - b / 2};
    return name == "sponge-preimage" ? sponge_preimage(s, 0) : sponge_collision(s);
  }
  if (name.rfind("one-more-", 0) == 0) {
    const std::string k = name.substr(9);
    if (k.empty() || k.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("one-more-K needs a number K");
    return predicates::one_more(std::stoul(k));
  }
  throw std::invalid_argument("unknown predicate '" + name + "'");
}

Database parse_pairs(const std::string& text, Index N) {
  std::vector<std::pair<Index, Index>> pairs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("pairs are written x:y");
    try {
      pairs.emplace_back(std::stoull(item.substr(0, colon)), std::stoull(item.substr(colon + 1)));
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bad pair '" + item + "'");
    }
  }
  for (const auto& [x, y] : pairs)
    if (x >= N || y >= N) throw std::invalid_argument("pair outside [N]");
  Database d = Database::from_pairs(N, N, pairs);
  if (!d.is_injective() || d.size() != pairs.size()) throw std::invalid_argument("pairs must form an injective database");
  return d;
}

std::vector<ExperimentConfig> frozen_suite() {
  std::vector<ExperimentConfig> out;
  auto add = [&](ExperimentConfig c) { out.push_back(std::move(c)); };
  for (std::size_t q = 1; q <= 3; ++q) {
    ExperimentConfig c;
    c.experiment = "cpo-distance";
    c.N = 4;
    c.q = q;
    c.seed = 100 + q;
    add(c);
  }
  for (const char* tw : {"uniform", "feistel2-pair"})
    for (std::size_t q = 1; q <= 2; ++q) {
      ExperimentConfig c;
      c.experiment = "soundness";
      c.twirl = tw;
      c.q = q;
      c.seed = 40 + q;
      add(c);
    }
  for (unsigned rounds : {3u, 4u, 7u})
    for (std::size_t q = 1; q <= 2; ++q) {
      ExperimentConfig c;
      c.experiment = "feistel-distance";
      c.rounds = rounds;
      c.q = q;
      c.seed = 5;
      add(c);
    }
  for (unsigned rounds : {3u, 7u}) {
    ExperimentConfig c;
    c.experiment = "distinguish";
    c.rounds = rounds;
    c.q = 2;
    c.seed = 0;
    add(c);
  }
  for (Index t = 0; t <= 1; ++t) {
    ExperimentConfig c;
    c.experiment = "canonical-closeness";
    c.t = t;
    add(c);
  }
  for (Index t = 1; t <= 2; ++t) {
    ExperimentConfig c;
    c.experiment = "restricted-closeness";
    c.M = 4;
    c.N = 4;
    c.t = t;
    add(c);
  }
  for (Index N : {4u, 8u})
    for (Index t = 1; t <= 2; ++t) {
      ExperimentConfig c;
      c.experiment = "compression-closeness";
      c.variant = "cycle-free";
      c.N = N;
      c.t = t;
      add(c);
    }
  const std::vector<std::pair<std::string, Index>> sparse = {
      {"dszs", 4}, {"dm-zero-preimage", 4}, {"dm-collision", 4}, {"dm-zero-preimage", 8}, {"dm-collision", 8}};
  for (const auto& [pred, N] : sparse)
    for (Index t = 1; t <= 2; ++t) {
      ExperimentConfig c;
      c.experiment = "compression-closeness";
      c.variant = "sparsity";
      c.predicate = pred;
      c.N = N;
      c.t = t;
      add(c);
    }
  for (const char* tw : {"uniform", "feistel2-pair"}) {
    ExperimentConfig c;
    c.experiment = "sophisticated-identities";
    c.twirl = tw;
    c.seed = 41;
    add(c);
  }
  {
    ExperimentConfig c;
    c.experiment = "cromulence";
    c.twirl = "uniform";
    c.seed = 1;
    c.budget = 1;
    add(c);
  }
  return out;
}

nlohmann::json SuiteOutcome::to_json() const {
  return {{"checked", checked}, {"recorded", recorded}, {"failed", failed}, {"missing", missing}, {"failures", failures}};
}

SuiteOutcome run_frozen_suite(FixtureStore& store, FixtureMode mode, bool force) {
  SuiteOutcome out;
  for (const auto& cfg : frozen_suite()) {
    const Experiment& e = find_experiment(cfg.experiment);
    const ExperimentResult r = e.run(cfg);
    for (const auto& [name, value] : r.frozen) {
      const std::string key = fixture_key(cfg, e, name);
      ++out.checked;
      if (mode == FixtureMode::Record) {
        if (store.record(key, value, 1e-9, build_git_ref(), force)) ++out.recorded;
      } else {
        const auto chk = store.check(key, value);
        if (!chk.ok) {
          ++out.failed;
          std::ostringstream os;
          os.precision(17);
          if (chk.missing) {
            ++out.missing;
            os << key << ": missing";
          } else
            os << key << ": stored " << chk.stored << ", measured " << chk.measured;
          out.failures.push_back(os.str());
        }
      }
    }
  }
  return out;
}

}  // namespace qperm::xcli
