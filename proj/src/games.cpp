// games.cpp

#include "qperm/games.hpp"

#include "qperm/mforacle.hpp"

#include <Eigen/Eigenvalues>
#include <absl/container/flat_hash_map.h>

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace qperm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double falling(double k, std::size_t len) {
  double v = 1;
  for (std::size_t j = 0; j < len; ++j) v *= k - static_cast<double>(j);
  return v;
}

double choose(double k, std::size_t len) { return falling(k, len) / falling(static_cast<double>(len), len); }

double search_size(std::size_t k, std::size_t lo, std::size_t hi, bool ordered, bool repeats) {
  double total = 0;
  const double kd = static_cast<double>(k);
  for (std::size_t len = lo; len <= hi; ++len) {
    if (ordered)
      total += repeats ? std::pow(kd, static_cast<double>(len)) : falling(kd, len);
    else
      total += repeats ? choose(kd + static_cast<double>(len) - 1, len) : choose(kd, len);
  }
  return total;
}

struct SublistSearch {
  const Predicate& r;
  const PairList& pairs;
  std::size_t lo, hi;
  bool repeats;
  PairList cur;
  std::vector<char> used;

  bool run(std::size_t start) {
    if (cur.size() >= lo && r.decide(cur)) return true;
    if (cur.size() == hi) return false;
    for (std::size_t j = r.ordered ? 0 : start; j < pairs.size(); ++j) {
      if (!repeats && used[j]) continue;
      cur.push_back(pairs[j]);
      used[j] = 1;
      const bool found = run(repeats ? j : j + 1);
      used[j] = 0;
      cur.pop_back();
      if (found) return true;
    }
    return false;
  }
};

bool distinct_inputs(const PairList& l) {
  for (std::size_t a = 0; a < l.size(); ++a)
    for (std::size_t b = a + 1; b < l.size(); ++b)
      if (l[a].first == l[b].first) return false;
  return true;
}

// Cached database decisions keyed by raw encoding.
class SatisfiesCache {
 public:
  SatisfiesCache(Predicate r, DbCodec codec) : r_(std::move(r)), codec_(codec) {}
  bool operator()(Index raw) {
    auto it = cache_.find(raw);
    if (it != cache_.end()) return it->second;
    const bool v = satisfies(r_, codec_.decode(raw));
    cache_.emplace(raw, v);
    return v;
  }
  const Predicate& predicate() const { return r_; }
  const DbCodec& codec() const { return codec_; }

 private:
  Predicate r_;
  DbCodec codec_;
  absl::flat_hash_map<Index, bool> cache_;
};

std::vector<std::size_t> output_positions(const RegisterLayout& layout, std::size_t l, Index N, bool inputs) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i <= l; ++i) {
    const std::string name = (inputs ? "ox" : "oy") + std::to_string(i);
    if (!layout.has(name)) throw std::invalid_argument("missing output register " + name);
    if (layout.cardinality(name) != N) throw std::invalid_argument("output register " + name + " has the wrong size");
    out.push_back(layout.position(name));
  }
  return out;
}

std::vector<std::string> output_names(std::size_t l) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= l; ++i) {
    out.push_back("ox" + std::to_string(i));
    out.push_back("oy" + std::to_string(i));
  }
  return out;
}

// Reduced density matrix on a few registers, stored by entry so that only
// observed output values cost memory.
class SparseView {
 public:
  void add(const SparseState& state, const RegisterView& view, double weight = 1.0) {
    absl::flat_hash_map<Index, std::vector<std::pair<Index, cplx>>> by_rest;
    for (const auto& [i, a] : state.amplitudes()) by_rest[view.rest(i)].emplace_back(view.extract(i), a);
    for (const auto& [rest, col] : by_rest)
      for (const auto& [k1, a1] : col)
        for (const auto& [k2, a2] : col) rho_[{k1, k2}] += weight * a1 * std::conj(a2);
  }
  void scale(double s) {
    for (auto& [k, v] : rho_) v *= s;
  }
  const absl::flat_hash_map<std::pair<Index, Index>, cplx>& entries() const { return rho_; }

 private:
  absl::flat_hash_map<std::pair<Index, Index>, cplx> rho_;
};

double trace_distance(const SparseView& a, const SparseView& b) {
  std::map<Index, Index> pos;
  for (const auto* v : {&a, &b})
    for (const auto& [k, x] : v->entries()) pos.emplace(k.first, 0);
  Index next = 0;
  for (auto& [k, p] : pos) p = next++;
  Matrix diff = Matrix::Zero(next, next);
  for (const auto& [k, x] : a.entries()) diff(pos[k.first], pos[k.second]) += x;
  for (const auto& [k, x] : b.entries()) diff(pos[k.first], pos[k.second]) -= x;
  double sum = 0;
  for (double e : hermitian_eigenvalues(diff)) sum += std::abs(e);
  return 0.5 * sum;
}

struct RealPass {
  GameResult result;
  SparseView view;  // on the output registers (empty when l = 0)
};

RealPass real_game_pass(const Predicate& r, const AdversaryCircuit& adv, Index N, std::size_t l,
                        const GameOptions& opts, bool with_view) {
  validate(adv);
  const RegisterLayout& layout = adv.layout;
  if (layout.cardinality("X") != N) throw std::invalid_argument("query register size differs from N");
  const auto xs = output_positions(layout, l, N, true), ys = output_positions(layout, l, N, false);
  const auto keep = output_names(l);
  with_view = with_view && l > 0;
  const SparseState init = SparseState::basis(layout, adv.initial);
  std::optional<RegisterView> view;
  if (with_view) view.emplace(layout, keep);

  std::vector<Permutation> perms;
  RealPass out;
  if (N <= opts.exact_max_n) {
    perms = all_permutations(N);
  } else if (opts.monte_carlo) {
    Philox rng(opts.seed);
    for (std::size_t s = 0; s < opts.samples; ++s) perms.push_back(random_permutation(N, rng));
    out.result.exact = false;
  } else {
    throw std::length_error("permutation enumeration cap exceeded (enable Monte Carlo)");
  }

  absl::flat_hash_map<Index, bool> list_cache;  // keyed by the output digits
  double sum = 0, sum_sq = 0;
  std::vector<std::vector<LinearOp>> gates(adv.steps.size());
  for (std::size_t k = 0; k < adv.steps.size(); ++k)
    for (const auto& g : adv.steps[k]) gates[k].push_back(dense_on(g.matrix, g.targets, layout));
  SparseState first = init;  // A_0 does not see the oracle
  for (const auto& g : gates[0]) first = g.apply(first);
  for (const auto& phi : perms) {
    const LinearOp oracle = permutation_oracle(layout, phi);
    SparseState fin = first;
    for (std::size_t k = 1; k < gates.size(); ++k) {
      fin = oracle.apply(fin);
      for (const auto& g : gates[k]) fin = g.apply(fin);
    }
    double win = 0;
    for (const auto& [i, a] : fin.amplitudes()) {
      PairList list;
      bool correct = true;
      Index key = 0;
      for (std::size_t k = 0; k < l; ++k) {
        const Index x = layout.digit(i, xs[k]), y = layout.digit(i, ys[k]);
        if (phi(x) != y) correct = false;
        list.emplace_back(x, y);
        key = (key * N + x) * N + y;
      }
      if (!correct) continue;
      auto it = list_cache.find(key);
      if (it == list_cache.end()) it = list_cache.emplace(key, r.decide(list)).first;
      if (it->second) win += std::norm(a);
    }
    sum += win;
    sum_sq += win * win;
    if (with_view) out.view.add(fin, *view);
  }
  const double n = static_cast<double>(perms.size());
  out.result.samples = perms.size();
  out.result.value = sum / n;
  if (!out.result.exact && perms.size() > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
    out.result.std_error = std::sqrt(var / n);
  }
  if (with_view) out.view.scale(1.0 / n);
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Completion sets for the sparsity-restricted compressions, cached per
// (database, point).
class ExclusionSets {
 public:
  ExclusionSets(const Predicate& r, DbCodec codec, bool backward)
      : sat_(r, codec), codec_(codec), backward_(backward) {}

  std::vector<Index> completions(Index raw, Index point) {
    const Index key = raw * codec_.m() + point;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<Index> out;
    // Forward: base I, extensions I[x -> y]. Backward: base J = I^{-1},
    // extensions J[y -> x] judged through their inverses.
    const Index base = backward_ ? codec_.flip(raw) : raw;
    const bool already = sat_(base);
    for (Index v = 0; v < codec_.n(); ++v) {
      if (codec_.in_image(raw, v)) continue;
      if (!already) {
        const Index ext = codec_.set(raw, point, v);
        if (sat_(backward_ ? codec_.flip(ext) : ext)) continue;
      }
      out.push_back(v);
    }
    cache_.emplace(key, out);
    return out;
  }

 private:
  SatisfiesCache sat_;
  DbCodec codec_;
  bool backward_;
  absl::flat_hash_map<Index, std::vector<Index>> cache_;
};

DensityMatrix mixture_view(const AdversaryCircuit& adv, const std::vector<Permutation>& perms,
                           const std::vector<double>& weights, const std::vector<std::string>& keep) {
  const SparseState init = SparseState::basis(adv.layout, adv.initial);
  DensityMatrix sum;
  for (std::size_t k = 0; k < perms.size(); ++k) {
    if (weights[k] == 0) continue;
    DensityMatrix rho = partial_trace(run_queries(adv, init, permutation_oracle(adv.layout, perms[k])), keep);
    rho *= weights[k];
    if (sum.dimension() == 0)
      sum = rho;
    else
      sum += rho;
  }
  return sum;
}

// Helstrom measurement: accept on the positive part of a - b.
std::pair<double, double> helstrom_accept(const DensityMatrix& a, const DensityMatrix& b) {
  const Matrix diff = a.entries() - b.entries();
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff);
  Matrix proj = Matrix::Zero(diff.rows(), diff.cols());
  for (Eigen::Index k = 0; k < diff.rows(); ++k)
    if (es.eigenvalues()(k) > 0) proj += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
  return {(proj * a.entries()).trace().real(), (proj * b.entries()).trace().real()};
}

}  // namespace

bool satisfies(const Predicate& r, const Database& i) {
  const PairList pairs = i.pairs();
  bool repeats = r.repeats;
  std::size_t hi;
  if (r.max_length) {
    hi = *r.max_length;
  } else {
    hi = pairs.size();
    repeats = false;
  }
  if (!repeats) hi = std::min(hi, pairs.size());
  const std::size_t lo = r.min_length;
  if (lo > hi) return lo == 0 && r.decide({});
  if (search_size(pairs.size(), lo, hi, r.ordered, repeats) > static_cast<double>(kSublistSearchCap))
    throw std::length_error("sublist search for " + r.name + " exceeds the cap");
  SublistSearch s{r, pairs, lo, hi, repeats, {}, std::vector<char>(pairs.size(), 0)};
  return s.run(0);
}

namespace predicates {

Predicate empty() { return {"empty", [](const PairList&) { return false; }, 1, 1, false, false}; }

Predicate single_pair() {
  return {"single-pair", [](const PairList& l) { return l.size() == 1; }, 1, 1, false, false};
}

Predicate one_more(std::size_t k) {
  if (k == 0) throw std::invalid_argument("one-more needs at least one pair");
  return {"one-more-" + std::to_string(k), [k](const PairList& l) { return l.size() == k && distinct_inputs(l); }, k,
          k, false, false};
}

Predicate cycle(Index N) {
  auto decide = [N](const PairList& l) {
    if (l.empty() || l.size() > N || !distinct_inputs(l)) return false;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l[i].first < l[0].first) return false;
      if (l[i].second != l[(i + 1) % l.size()].first) return false;
    }
    return true;
  };
  return {"cycle", decide, 1, static_cast<std::size_t>(N), true, false};
}

Predicate dm_zero_preimage() {
  return {"dm-zero-preimage", [](const PairList& l) { return l.size() == 1 && l[0].first == l[0].second; }, 1, 1,
          false, false};
}

Predicate dm_collision() {
  auto decide = [](const PairList& l) {
    if (l.size() != 2) return false;
    const auto& [x, y] = l[0];
    const auto& [x2, y2] = l[1];
    return x != x2 && y != y2 && (x ^ y) == (x2 ^ y2);
  };
  return {"dm-collision", decide, 2, 2, false, false};
}

Predicate dszs(unsigned n) {
  const Index low = (Index{1} << n) - 1;
  auto decide = [low](const PairList& l) { return l.size() == 1 && (l[0].first & low) == 0 && (l[0].second & low) == 0; };
  return {"dszs", decide, 1, 1, false, false};
}

Predicate union_of(const Predicate& a, const Predicate& b) {
  Predicate u;
  u.name = a.name + "|" + b.name;
  auto da = a.decide, db = b.decide;
  u.decide = [da, db](const PairList& l) { return da(l) || db(l); };
  u.min_length = std::min(a.min_length, b.min_length);
  if (a.max_length && b.max_length) u.max_length = std::max(*a.max_length, *b.max_length);
  u.ordered = a.ordered || b.ordered;
  u.repeats = a.repeats || b.repeats;
  return u;
}

}  // namespace predicates

LinearOp predicate_projector(const RegisterLayout& layout, const DbCodec& codec, const Predicate& r,
                             const std::string& dreg) {
  const std::size_t dpos = layout.position(dreg);
  if (layout.cardinality(dpos) != codec.cardinality()) throw std::invalid_argument("database register mismatch");
  auto cache = std::make_shared<SatisfiesCache>(r, codec);
  return LinearOp::diagonal(layout, [layout, dpos, cache](Index i) { return (*cache)(layout.digit(i, dpos)) ? 1.0 : 0.0; });
}

LinearOp predicate_projector(const DatabaseSpace& space, const Predicate& r) {
  if (space.kind() != DbKind::Injective) throw std::invalid_argument("predicate projectors act on injective databases");
  return predicate_projector(space.layout(), space.codec(), r);
}

nlohmann::json SparsityReport::to_json() const {
  return {{"t", t},
          {"s_t", s_t},
          {"witness", witness.to_text()},
          {"direction", forward ? "forward" : "backward"},
          {"point", point},
          {"count", count}};
}

SparsityReport brute_sparsity(const Predicate& r, Index N, Index t, std::size_t cap) {
  if (t >= N) throw std::invalid_argument("t must be below N");
  const auto items = enumerate_databases(DbKind::Injective, N, N, t, cap);
  SparsityReport rep;
  rep.t = t;
  rep.witness = Database(N, N);
  std::vector<std::size_t> row(N), col(N);
  for (const auto& i : items) {
    if (satisfies(r, i)) continue;
    std::fill(row.begin(), row.end(), 0);
    std::fill(col.begin(), col.end(), 0);
    for (Index x = 0; x < N; ++x) {
      if (i.defined(x)) continue;
      for (Index y = 0; y < N; ++y) {
        if (i.in_image(y)) continue;
        if (satisfies(r, assign(i, x, y, DbKind::Injective))) {
          ++row[x];
          ++col[y];
        }
      }
    }
    for (Index v = 0; v < N; ++v) {
      if (row[v] > rep.s_t) {
        rep.s_t = row[v];
        rep.witness = i;
        rep.forward = true;
        rep.point = v;
        rep.count = row[v];
      }
      if (col[v] > rep.s_t) {
        rep.s_t = col[v];
        rep.witness = i;
        rep.forward = false;
        rep.point = v;
        rep.count = col[v];
      }
    }
  }
  return rep;
}

GameResult play_real_game(const Predicate& r, const AdversaryCircuit& adv, Index N, std::size_t l,
                          const GameOptions& opts) {
  return real_game_pass(r, adv, N, l, opts, false).result;
}

double play_compressed_game(const Predicate& r, const AdversaryCircuit& adv, Index N) {
  PermOracleConfig cfg{N, N};
  const CompressedRun run = run_cp_experiment(cfg, adv, false);
  const RegisterLayout& layout = run.state.layout();
  const std::size_t dpos = layout.position("D");
  SatisfiesCache sat(r, cfg.codec());
  double p = 0;
  for (const auto& [i, a] : run.state.amplitudes())
    if (sat(layout.digit(i, dpos))) p += std::norm(a);
  return p;
}

bool SearchBound::holds(double tol) const { return std::sqrt(p1) <= bound_rhs + tol; }

std::string search_bound_csv_header() { return "predicate,N,q,l,p1,p2,bound_rhs,seed"; }

std::string SearchBound::csv_row() const {
  std::ostringstream os;
  os << predicate << ',' << N << ',' << q << ',' << l << ',' << format_double(p1) << ',' << format_double(p2) << ','
     << format_double(bound_rhs) << ',' << seed;
  return os.str();
}

SearchBound search_bound_check(const Predicate& r, const AdversaryCircuit& adv, Index N, std::size_t l,
                               std::uint64_t seed, const GameOptions& opts) {
  SearchBound b;
  b.predicate = r.name;
  b.N = N;
  b.q = adv.queries();
  b.l = l;
  b.seed = seed;
  if (N <= b.q + l) throw std::invalid_argument("N - q - l must be positive");
  RealPass real = real_game_pass(r, adv, N, l, opts, true);
  b.p1 = real.result.value;
  PermOracleConfig cfg{N, N};
  const CompressedRun run = run_cp_experiment(cfg, adv, false);
  {
    const std::size_t dpos = run.state.layout().position("D");
    SatisfiesCache sat(r, cfg.codec());
    for (const auto& [i, a] : run.state.amplitudes())
      if (sat(run.state.layout().digit(i, dpos))) b.p2 += std::norm(a);
  }
  if (l > 0) {
    SparseView ideal;
    ideal.add(run.state, RegisterView(run.state.layout(), output_names(l)));
    b.adv = trace_distance(real.view, ideal);
  }
  b.slack = static_cast<double>(l) / std::sqrt(static_cast<double>(N - b.q - l));
  b.bound_rhs = std::sqrt(b.p2) + b.slack + b.adv;
  return b;
}

LinearOp cycle_free_compression(const PermOracleConfig& cfg, const RegisterLayout& layout, const std::string& xreg,
                                const std::string& dreg) {
  cfg.validate();
  const DbCodec codec = cfg.codec();
  const std::size_t xpos = layout.position(xreg), dpos = layout.position(dreg);
  if (layout.cardinality(xpos) != cfg.N) throw std::invalid_argument("input register size differs from N");
  auto sets = [layout, dpos, codec](Index base, Index x) {
    const Index raw = layout.digit(base, dpos);
    std::vector<Index> out;
    for (Index y = 0; y < codec.n(); ++y)
      if (y != x && codec.get(raw, y) == codec.n() && !codec.in_image(raw, y)) out.push_back(y);
    return out;
  };
  return swap_compression_indexed(
      layout, dreg, codec, [layout, xpos](Index i) { return layout.digit(i, xpos); }, sets, cfg.t_max);
}

namespace {

LinearOp sparsity_compression(const PermOracleConfig& cfg, const RegisterLayout& layout, const Predicate& r,
                              const std::string& xreg, const std::string& dreg, bool backward) {
  cfg.validate();
  const DbCodec codec = cfg.codec();
  const std::size_t xpos = layout.position(xreg), dpos = layout.position(dreg);
  if (layout.cardinality(xpos) != cfg.N) throw std::invalid_argument("input register size differs from N");
  auto ex = std::make_shared<ExclusionSets>(r, codec, backward);
  auto sets = [layout, dpos, ex](Index base, Index x) { return ex->completions(layout.digit(base, dpos), x); };
  return swap_compression_indexed(
      layout, dreg, codec, [layout, xpos](Index i) { return layout.digit(i, xpos); }, sets, cfg.t_max);
}

}  // namespace

LinearOp sparsity_compression_forward(const PermOracleConfig& cfg, const RegisterLayout& layout, const Predicate& r,
                                      const std::string& xreg, const std::string& dreg) {
  return sparsity_compression(cfg, layout, r, xreg, dreg, false);
}

LinearOp sparsity_compression_backward(const PermOracleConfig& cfg, const RegisterLayout& layout, const Predicate& r,
                                       const std::string& xreg, const std::string& dreg) {
  return sparsity_compression(cfg, layout, r, xreg, dreg, true);
}

LinearOp modified_cp(const PermOracleConfig& cfg, const RegisterLayout& layout, const LinearOp& forward_compression,
                     const LinearOp& backward_compression) {
  return build_cp_from(cfg, layout, forward_compression, backward_compression);
}

double commutator_norm(const LinearOp& a, const LinearOp& b, const std::vector<Index>& columns) {
  double sum = 0;
  for (Index c : columns) {
    const SparseState e = SparseState::basis(a.layout(), c);
    sum += (a.apply(b.apply(e)) - b.apply(a.apply(e))).norm_squared();
  }
  return std::sqrt(sum);
}

double compression_closeness(const PermOracleConfig& cfg, CompressionVariant variant, Index t, const Predicate& r) {
  PermOracleConfig full = cfg;
  full.t_max = cfg.N;
  full.validate();
  const DbCodec codec = full.codec();
  RegisterLayout layout({{"X", full.N}, {"D", codec.cardinality()}});
  LinearOp pc = build_pc(full, layout);
  LinearOp other = variant == CompressionVariant::CycleFree         ? cycle_free_compression(full, layout)
                   : variant == CompressionVariant::SparsityForward ? sparsity_compression_forward(full, layout, r)
                                                                    : sparsity_compression_backward(full, layout, r);
  LinearOp diff = pc - other;
  DatabaseSpace space(DbKind::Injective, full.N, full.N, t);
  // Both operators are block diagonal over blocks {I} u {I[x -> y]}.
  double best = 0;
  for (const auto& base : space.items()) {
    for (Index x = 0; x < full.N; ++x) {
      if (base.defined(x)) continue;
      std::vector<Index> cols{layout.encode({x, codec.encode(base)})};
      if (base.size() + 1 <= t)
        for (Index y = 0; y < full.N; ++y)
          if (!base.in_image(y)) cols.push_back(layout.encode({x, codec.encode(assign(base, x, y, DbKind::Injective))}));
      best = std::max(best, restricted_operator_norm(diff, cols));
    }
  }
  return best;
}

std::vector<Index> query_columns(const PermOracleConfig& cfg, const RegisterLayout& layout, Index t) {
  DatabaseSpace space(DbKind::Injective, cfg.N, cfg.N, t);
  const std::size_t bpos = layout.position("B"), xpos = layout.position("X"), ypos = layout.position("Y"),
                    dpos = layout.position("D");
  std::vector<Index> out;
  for (Index raw : space.raws())
    for (Index b = 0; b < 2; ++b)
      for (Index x = 0; x < cfg.N; ++x)
        for (Index y = 0; y < cfg.N; ++y) {
          Index i = layout.with_digit(0, bpos, b);
          i = layout.with_digit(i, xpos, x);
          i = layout.with_digit(i, ypos, y);
          out.push_back(layout.with_digit(i, dpos, raw));
        }
  return out;
}

void SpongeParams::validate() const {
  if (r < 1 || c < 1) throw std::invalid_argument("sponge rate and capacity must be positive");
  if (r + c > 16) throw std::invalid_argument("sponge width too large");
}

Index sponge_eval(const SpongeParams& s, const Permutation& phi, const std::vector<Index>& message) {
  const PairList chain = sponge_chain(s, phi, message);
  return s.rate_of(chain.back().second);
}

PairList sponge_chain(const SpongeParams& s, const Permutation& phi, const std::vector<Index>& message) {
  s.validate();
  if (message.empty()) throw std::invalid_argument("empty sponge message");
  if (phi.size() != s.width()) throw std::invalid_argument("permutation width differs from r + c");
  PairList chain;
  Index u = 0;
  for (Index m : message) {
    if (m >> s.r) throw std::invalid_argument("message block exceeds the rate");
    const Index x = u ^ s.block(m);
    u = phi(x);
    chain.emplace_back(x, u);
  }
  return chain;
}

namespace {

bool is_chain(const SpongeParams& s, const PairList& l, std::size_t begin, std::size_t end, std::size_t max_blocks) {
  if (end <= begin || end - begin > max_blocks) return false;
  if (s.capacity_of(l[begin].first) != 0) return false;
  for (std::size_t i = begin; i + 1 < end; ++i)
    if (s.capacity_of(l[i].second) != s.capacity_of(l[i + 1].first)) return false;
  return true;
}

bool same_range(const PairList& l, std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
  if (a1 - a0 != b1 - b0) return false;
  for (std::size_t k = 0; k < a1 - a0; ++k)
    if (l[a0 + k] != l[b0 + k]) return false;
  return true;
}

// Some split of l into two distinct chains with matching final outputs.
template <class Match>
bool two_chains(const SpongeParams& s, const PairList& l, std::size_t max_blocks, Match match) {
  for (std::size_t k = 1; k < l.size(); ++k)
    if (is_chain(s, l, 0, k, max_blocks) && is_chain(s, l, k, l.size(), max_blocks) &&
        !same_range(l, 0, k, k, l.size()) && match(l[k - 1].second, l.back().second))
      return true;
  return false;
}

}  // namespace

std::vector<Index> sponge_message(const SpongeParams& s, const PairList& chain) {
  s.validate();
  if (!is_chain(s, chain, 0, chain.size(), chain.size())) throw std::invalid_argument("list is not a sponge chain");
  std::vector<Index> m{s.rate_of(chain[0].first)};
  for (std::size_t i = 1; i < chain.size(); ++i) m.push_back(s.rate_of(chain[i].first) ^ s.rate_of(chain[i - 1].second));
  return m;
}

Predicate sponge_preimage(const SpongeParams& s, Index w, std::size_t max_blocks) {
  s.validate();
  auto decide = [s, w, max_blocks](const PairList& l) {
    return is_chain(s, l, 0, l.size(), max_blocks) && s.rate_of(l.back().second) == w;
  };
  return {"sponge-preimage-" + std::to_string(w), decide, 1, max_blocks, true, true};
}

Predicate sponge_internal_preimage(const SpongeParams& s, Index z, std::size_t max_blocks) {
  s.validate();
  auto decide = [s, z, max_blocks](const PairList& l) {
    return is_chain(s, l, 0, l.size(), max_blocks) && s.capacity_of(l.back().second) == z;
  };
  return {"sponge-internal-preimage-" + std::to_string(z), decide, 1, max_blocks, true, true};
}

Predicate sponge_internal_collision(const SpongeParams& s, std::size_t max_blocks) {
  s.validate();
  auto decide = [s, max_blocks](const PairList& l) {
    if (is_chain(s, l, 0, l.size(), max_blocks) && s.capacity_of(l.back().second) == 0) return true;
    return two_chains(s, l, max_blocks, [&s](Index a, Index b) {
      return s.capacity_of(a) != 0 && s.capacity_of(a) == s.capacity_of(b);
    });
  };
  return {"sponge-internal-collision", decide, 1, 2 * max_blocks, true, true};
}

Predicate sponge_collision(const SpongeParams& s, std::size_t max_blocks) {
  s.validate();
  auto decide = [s, max_blocks](const PairList& l) {
    return two_chains(s, l, max_blocks, [&s](Index a, Index b) { return s.rate_of(a) == s.rate_of(b); });
  };
  return {"sponge-collision", decide, 2, 2 * max_blocks, true, true};
}

SpongePredicates sponge_predicates(const SpongeParams& s, Index w, Index z, std::size_t max_blocks) {
  return {sponge_preimage(s, w, max_blocks), sponge_internal_preimage(s, z, max_blocks),
          sponge_internal_collision(s, max_blocks), sponge_collision(s, max_blocks)};
}

nlohmann::json DistinguisherReport::to_json() const {
  return {{"attack", attack},
          {"n", n},
          {"rounds", rounds},
          {"q", q},
          {"exact", exact},
          {"accept_feistel", accept_feistel},
          {"accept_uniform", accept_uniform},
          {"advantage", advantage},
          {"advantage_ci", {advantage_lo, advantage_hi}},
          {"samples", samples},
          {"view_trace_distance", view_trace_distance},
          {"permutation_tv", permutation_tv}};
}

std::vector<std::string> builtin_attacks() { return {"xor-statistic", "superposition"}; }

namespace {

struct ExactFeistel {
  std::vector<Permutation> perms;
  std::vector<double> feistel, uniform;
  double tv = 0;
};

ExactFeistel exact_feistel(unsigned rounds) {
  const FeistelParams p(1);
  ExactFeistel e;
  e.perms = all_permutations(p.size());
  e.feistel = feistel_distribution(p, rounds);
  e.uniform.assign(e.perms.size(), 1.0 / static_cast<double>(e.perms.size()));
  for (std::size_t k = 0; k < e.perms.size(); ++k) e.tv += 0.5 * std::abs(e.feistel[k] - e.uniform[k]);
  return e;
}

}  // namespace

DistinguisherReport distinguisher_suite(unsigned n, unsigned rounds, const std::string& attack, std::size_t q,
                                        std::uint64_t seed, std::size_t budget) {
  if (n == 0 || n > 2) throw std::length_error("distinguishers run only at n = 1 (exact) or n = 2 (sampled)");
  if (budget > kDistinguisherBudgetCap) throw std::length_error("distinguisher budget exceeds the cap");
  if (rounds == 0) throw std::invalid_argument("at least one round is required");
  const FeistelParams p(n);
  const Index N = p.size();
  DistinguisherReport rep;
  rep.attack = attack;
  rep.n = n;
  rep.rounds = rounds;
  rep.q = q;

  if (attack == "xor-statistic") {
    if (q != 2) throw std::invalid_argument("the XOR statistic uses exactly two queries");
    const Index x = p.join(0, 0), x2 = p.join(1, 0);
    auto accept = [&](Index y, Index y2) { return (p.right(y) ^ p.right(y2)) == (p.left(x) ^ p.left(x2)); };
    std::size_t hits = 0, pairs = 0;
    for (Index y = 0; y < N; ++y)
      for (Index y2 = 0; y2 < N; ++y2)
        if (y != y2) {
          ++pairs;
          hits += accept(y, y2);
        }
    rep.accept_uniform = static_cast<double>(hits) / static_cast<double>(pairs);
    if (n == 1) {
      const ExactFeistel e = exact_feistel(rounds);
      for (std::size_t k = 0; k < e.perms.size(); ++k)
        if (accept(e.perms[k](x), e.perms[k](x2))) rep.accept_feistel += e.feistel[k];
      rep.advantage = rep.advantage_lo = rep.advantage_hi = std::abs(rep.accept_feistel - rep.accept_uniform);
      rep.permutation_tv = e.tv;
      const RegisterLayout layout = permutation_adversary_layout(N, 1, 2);
      const AdversaryCircuit adv = classical_adversary(layout, {x, x2}, {}, 2);
      const auto keep = output_names(2);
      rep.view_trace_distance =
          trace_distance(mixture_view(adv, e.perms, e.feistel, keep), mixture_view(adv, e.perms, e.uniform, keep));
    } else {
      Philox rng(seed);
      std::size_t acc = 0;
      for (std::size_t s = 0; s < budget; ++s) {
        std::vector<RoundFunction> rs;
        for (unsigned k = 0; k < rounds; ++k) rs.push_back(random_round_function(p, rng));
        const Permutation phi = feistel_permutation(p, rs);
        acc += accept(phi(x), phi(x2));
      }
      const Estimate est = wilson_estimate(acc, budget);
      rep.exact = false;
      rep.samples = budget;
      rep.accept_feistel = est.value;
      rep.advantage = std::abs(est.value - rep.accept_uniform);
      const double a = std::abs(est.lo - rep.accept_uniform), b = std::abs(est.hi - rep.accept_uniform);
      rep.advantage_hi = std::max(a, b);
      rep.advantage_lo = (est.lo <= rep.accept_uniform && rep.accept_uniform <= est.hi) ? 0.0 : std::min(a, b);
      rep.view_trace_distance = rep.permutation_tv = kNaN;
    }
    return rep;
  }
  if (attack == "superposition") {
    if (n != 1) throw std::invalid_argument("the superposition attack is evaluated only at n = 1");
    const RegisterLayout layout = permutation_adversary_layout(N, 1, 0);
    DistinguisherReport out = distinguisher_suite(rounds, hadamard_adversary(layout, q, seed));
    out.attack = attack;
    return out;
  }
  throw std::invalid_argument("unknown attack: " + attack);
}

DistinguisherReport distinguisher_suite(unsigned rounds, const AdversaryCircuit& adv) {
  validate(adv);
  if (adv.layout.cardinality("X") != 4) throw std::invalid_argument("adversary distinguishers run at n = 1 (N = 4)");
  if (adv.layout.dimension() > 4096) throw std::length_error("adversary view too large for a dense matrix");
  std::vector<std::string> keep;
  for (std::size_t k = 0; k < adv.layout.size(); ++k) keep.push_back(adv.layout.name(k));
  const ExactFeistel e = exact_feistel(rounds);
  const DensityMatrix rf = mixture_view(adv, e.perms, e.feistel, keep);
  const DensityMatrix ru = mixture_view(adv, e.perms, e.uniform, keep);
  DistinguisherReport rep;
  rep.attack = "custom";
  rep.rounds = rounds;
  rep.q = adv.queries();
  rep.view_trace_distance = trace_distance(rf, ru);
  const auto [af, au] = helstrom_accept(rf, ru);
  rep.accept_feistel = af;
  rep.accept_uniform = au;
  rep.advantage = rep.advantage_lo = rep.advantage_hi = af - au;
  rep.permutation_tv = e.tv;
  return rep;
}

}  // namespace qperm
