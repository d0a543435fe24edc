// mforacle.cpp

#include "qperm/mforacle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace qperm {

namespace {

std::vector<std::string> register_names(const RegisterLayout& layout) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layout.size(); ++i) names.push_back(layout.name(i));
  return names;
}

// Block diagonal operator in a bit register: op0 on bit 0, op1 on bit 1.
LinearOp split_on_bit(const RegisterLayout& layout, const std::string& reg, const LinearOp& op0, const LinearOp& op1) {
  const std::size_t pos = layout.position(reg);
  auto branch = [layout, pos, op0, op1](bool adjoint) {
    return [=](const SparseState& s) {
      SparseState parts[2] = {SparseState(layout), SparseState(layout)};
      for (const auto& [i, a] : s.amplitudes()) parts[layout.digit(i, pos)].set(i, a);
      SparseState out = adjoint ? op0.apply_adjoint(parts[0]) : op0.apply(parts[0]);
      out += adjoint ? op1.apply_adjoint(parts[1]) : op1.apply(parts[1]);
      return out;
    };
  };
  return LinearOp(layout, branch(false), branch(true));
}

}  // namespace

bool TwirlPair::operator<(const TwirlPair& o) const {
  if (pi.table() != o.pi.table()) return pi.table() < o.pi.table();
  return omega.table() < o.omega.table();
}

Permutation random_permutation(Index n, Philox& rng) {
  std::vector<Index> t(n);
  for (Index i = 0; i < n; ++i) t[i] = i;
  for (Index i = n; i-- > 1;) std::swap(t[i], t[rng.below(i + 1)]);
  return Permutation(std::move(t));
}

Permutation feistel2(const FeistelParams& p, const RoundFunction& g1, const RoundFunction& g2) {
  return feistel_permutation(p, {g1, g2});
}

std::vector<double> feistel_distribution(const FeistelParams& p, unsigned rounds) {
  if (p.n != 1) throw std::length_error("Feistel distributions are enumerated only at n = 1");
  if (rounds == 0) throw std::invalid_argument("at least one round is required");
  const auto fs = all_round_functions(p);
  std::vector<double> mass(factorial(p.size()), 0.0);
  std::vector<std::size_t> digit(rounds, 0);
  std::size_t total = 0;
  while (true) {
    std::vector<RoundFunction> rs;
    for (std::size_t d : digit) rs.push_back(fs[d]);
    mass[permutation_rank(feistel_permutation(p, rs))] += 1.0;
    ++total;
    std::size_t pos = 0;
    while (pos < rounds && ++digit[pos] == fs.size()) digit[pos++] = 0;
    if (pos == rounds) break;
  }
  for (double& m : mass) m /= static_cast<double>(total);
  return mass;
}

TwirlDistribution TwirlDistribution::uniform(const FeistelParams& p) {
  TwirlDistribution d;
  d.kind_ = TwirlKind::Uniform;
  d.p_ = p;
  if (p.n == 1) {
    const auto perms = all_permutations(p.size());
    const double w = 1.0 / static_cast<double>(perms.size() * perms.size());
    auto sup = std::make_shared<Weighted>();
    for (const auto& a : perms)
      for (const auto& b : perms) sup->push_back({TwirlPair{a, b}, w});
    d.support_ = sup;
  }
  return d;
}

TwirlDistribution TwirlDistribution::feistel2_pair(const FeistelParams& p) {
  TwirlDistribution d;
  d.kind_ = TwirlKind::Feistel2Pair;
  d.p_ = p;
  if (p.n == 1) {
    const auto mass = feistel_distribution(p, 2);
    const Index n = p.size();
    auto sup = std::make_shared<Weighted>();
    for (Index a = 0; a < mass.size(); ++a) {
      if (mass[a] == 0) continue;
      for (Index b = 0; b < mass.size(); ++b) {
        if (mass[b] == 0) continue;
        // omega^{-1} has rank b.
        sup->push_back({TwirlPair{permutation_unrank(n, a), permutation_unrank(n, b).inverse()}, mass[a] * mass[b]});
      }
    }
    std::sort(sup->begin(), sup->end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    d.support_ = sup;
  }
  return d;
}

TwirlDistribution TwirlDistribution::custom(const FeistelParams& p, Weighted weights) {
  double total = 0;
  for (const auto& [t, w] : weights) {
    if (w < 0) throw std::invalid_argument("negative twirl weight");
    if (t.pi.size() != p.size() || t.omega.size() != p.size()) throw std::invalid_argument("twirl size mismatch");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("twirl weights must sum to 1");
  std::sort(weights.begin(), weights.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  Weighted merged;
  for (auto& e : weights) {
    if (e.second == 0) continue;
    if (!merged.empty() && merged.back().first == e.first)
      merged.back().second += e.second;
    else
      merged.push_back(std::move(e));
  }
  TwirlDistribution d;
  d.kind_ = TwirlKind::Custom;
  d.p_ = p;
  d.support_ = std::make_shared<Weighted>(std::move(merged));
  return d;
}

std::string TwirlDistribution::name() const {
  switch (kind_) {
    case TwirlKind::Uniform: return "uniform";
    case TwirlKind::Feistel2Pair: return "feistel2-pair";
    case TwirlKind::Custom: return "custom";
  }
  return "custom";
}

const TwirlDistribution::Weighted& TwirlDistribution::support() const {
  if (!support_) throw std::logic_error("twirl distribution is not enumerable");
  return *support_;
}

double TwirlDistribution::weight(const Permutation& pi, const Permutation& omega) const {
  if (!support_) {
    if (kind_ == TwirlKind::Uniform) {
      const double f = static_cast<double>(factorial(p_.size()));
      return 1.0 / (f * f);
    }
    throw std::logic_error("twirl distribution is not enumerable");
  }
  const TwirlPair key{pi, omega};
  auto it = std::lower_bound(support_->begin(), support_->end(), key,
                             [](const auto& e, const TwirlPair& k) { return e.first < k; });
  return it != support_->end() && it->first == key ? it->second : 0.0;
}

TwirlPair TwirlDistribution::sample(Philox& rng) const {
  switch (kind_) {
    case TwirlKind::Uniform: return {random_permutation(p_.size(), rng), random_permutation(p_.size(), rng)};
    case TwirlKind::Feistel2Pair: {
      Permutation pi = feistel2(p_, random_round_function(p_, rng), random_round_function(p_, rng));
      Permutation om = feistel2(p_, random_round_function(p_, rng), random_round_function(p_, rng));
      return {pi, om.inverse()};
    }
    case TwirlKind::Custom: break;
  }
  double r = rng.uniform(), acc = 0;
  for (const auto& [t, w] : *support_) {
    acc += w;
    if (r < acc) return t;
  }
  return support_->back().first;
}

TwirlDistribution TwirlDistribution::flipped() const {
  if (!support_) return *this;  // uniform and feistel2-pair are flip invariant
  Weighted w;
  for (const auto& [t, p] : *support_) w.push_back({TwirlPair{t.omega.inverse(), t.pi.inverse()}, p});
  std::sort(w.begin(), w.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  TwirlDistribution d = *this;
  d.support_ = std::make_shared<Weighted>(std::move(w));
  return d;
}

Database star_action(const Permutation& pi, const Database& i, const Permutation& omega) {
  if (pi.size() != i.m() || omega.size() != i.n()) throw std::invalid_argument("twirl size mismatch");
  const Permutation winv = omega.inverse();
  std::vector<std::pair<Index, Index>> pairs;
  for (const auto& [x, y] : i.pairs()) pairs.emplace_back(pi(x), winv(y));
  return Database::from_pairs(i.m(), i.n(), pairs);
}

bool resolves(const FeistelParams& p, const TwirlPair& t, const Database& i) {
  return is_allowable(p, star_action(t.pi, i, t.omega));
}

bool resolves_at(const FeistelParams& p, const TwirlPair& t, const Database& i, Index x) {
  if (i.defined(x)) return false;
  const Database a = star_action(t.pi, i, t.omega);
  return is_allowable(p, a) && allows(p, a, t.pi(x));
}

namespace {

TwirlDistribution condition(const TwirlDistribution& d, const std::function<bool(const TwirlPair&)>& keep) {
  TwirlDistribution::Weighted w;
  double total = 0;
  for (const auto& [t, p] : d.support())
    if (keep(t)) {
      w.push_back({t, p});
      total += p;
    }
  if (w.empty() || total <= 0) throw std::invalid_argument("conditioning event is empty");
  for (auto& e : w) e.second /= total;
  return TwirlDistribution::custom(d.params(), std::move(w));
}

}  // namespace

TwirlDistribution condition_on_resolving(const TwirlDistribution& d, const Database& i) {
  const FeistelParams p = d.params();
  return condition(d, [&](const TwirlPair& t) { return resolves(p, t, i); });
}

TwirlDistribution condition_on_allowing(const TwirlDistribution& d, const Database& i, Index x) {
  const FeistelParams p = d.params();
  return condition(d, [&](const TwirlPair& t) { return resolves_at(p, t, i, x); });
}

// ---- purification space ----

PurificationSpace::PurificationSpace(const FeistelParams& p, const RegisterLayout& adversary, Index t_max, bool tagged)
    : p_(p), t_max_(t_max), tagged_(tagged), adversary_(adversary) {
  if (p.n != 1) throw std::length_error("full purification spaces exist only at n = 1");
  if (t_max > p.half()) throw std::invalid_argument("t_max exceeds the round database size");
  for (const char* r : {"B", "X", "Y"})
    if (!adversary.has(r)) throw std::invalid_argument(std::string("adversary layout lacks register ") + r);
  if (adversary.cardinality("B") != 2 || adversary.cardinality("X") != p.size() || adversary.cardinality("Y") != p.size())
    throw std::invalid_argument("adversary query registers have the wrong size");
  perms_ = all_permutations(p.size());
  const Index nperm = perms_.size();
  const Index rcard = p.round_codec().cardinality();
  std::vector<std::pair<std::string, Index>> regs;
  if (tagged) {
    regs.emplace_back("Tag", 2);
    regs.emplace_back("D", injective_codec().cardinality());
  }
  for (auto r : {std::pair<std::string, Index>{"Pi", nperm}, {"Omega", nperm}, {"H", rcard}, {"K", rcard}, {"F", rcard}})
    regs.push_back(r);
  block_ = RegisterLayout(regs);
  layout_ = adversary_.concat(block_);
}

Index PurificationSpace::purification_index(const Permutation& pi, const Permutation& omega, const TripleDB& d,
                                            Index rest) const {
  const DbCodec rc = p_.round_codec();
  Index local = 0;
  if (tagged_) local = block_.with_digit(local, block_.position("D"), injective_codec().empty());
  local = block_.with_digit(local, block_.position("Pi"), permutation_rank(pi));
  local = block_.with_digit(local, block_.position("Omega"), permutation_rank(omega));
  local = block_.with_digit(local, block_.position("H"), rc.encode(d.h));
  local = block_.with_digit(local, block_.position("K"), rc.encode(d.k));
  local = block_.with_digit(local, block_.position("F"), rc.encode(d.f));
  return rest * block_.dimension() + local;
}

Index PurificationSpace::database_index(const Database& i, Index rest) const {
  if (!tagged_) throw std::logic_error("database branch requires a tagged space");
  const DbCodec rc = p_.round_codec();
  Index local = block_.with_digit(0, block_.position("Tag"), 1);
  local = block_.with_digit(local, block_.position("D"), injective_codec().encode(i));
  for (const char* r : {"H", "K", "F"}) local = block_.with_digit(local, block_.position(r), rc.empty());
  return rest * block_.dimension() + local;
}

bool PurificationSpace::on_database_branch(Index full) const {
  return tagged_ && block_.digit(block_offset(full), 0) == 1;
}

TwirlPair PurificationSpace::twirl_at(Index full) const {
  const Index local = block_offset(full);
  return {perms_[block_.digit(local, block_.position("Pi"))], perms_[block_.digit(local, block_.position("Omega"))]};
}

TripleDB PurificationSpace::triple_at(Index full) const { return decode_triple(p_, layout_, full); }

// ---- mf operators ----

namespace {

// Shared index arithmetic for operators on a purification space.
struct SpaceAccess {
  FeistelParams p;
  RegisterLayout layout;
  DbCodec rc;
  std::size_t bpos, xpos, ypos, pipos, ompos, hpos, kpos, fpos, tagpos;
  bool tagged;
  std::vector<std::vector<Index>> table;  // table[rank][x]
  std::vector<Index> inverse_rank;

  explicit SpaceAccess(const PurificationSpace& s)
      : p(s.params()),
        layout(s.layout()),
        rc(s.params().round_codec()),
        bpos(layout.position("B")),
        xpos(layout.position("X")),
        ypos(layout.position("Y")),
        pipos(layout.position("Pi")),
        ompos(layout.position("Omega")),
        hpos(layout.position("H")),
        kpos(layout.position("K")),
        fpos(layout.position("F")),
        tagpos(s.tagged() ? layout.position("Tag") : 0),
        tagged(s.tagged()) {
    for (const auto& perm : s.permutations()) {
      table.push_back(perm.table());
      inverse_rank.push_back(permutation_rank(perm.inverse()));
    }
  }

  bool db_branch(Index i) const { return tagged && layout.digit(i, tagpos) == 1; }
  Index u(Index i) const { return table[layout.digit(i, pipos)][layout.digit(i, xpos)]; }
  Index u_or_none(Index i) const { return db_branch(i) ? kNoInput : u(i); }

  // v = Feist(u) from the databases, or kNoInput if a chain link is missing.
  Index feistel_from_databases(Index i, Index ui) const {
    const Index bot = p.half();
    const Index z = rc.get(layout.digit(i, hpos), p.left(ui));
    if (z == bot) return kNoInput;
    const Index m = p.right(ui) ^ z;
    const Index w = rc.get(layout.digit(i, kpos), m);
    if (w == bot) return kNoInput;
    const Index vl = p.left(ui) ^ w;
    const Index z2 = rc.get(layout.digit(i, fpos), vl);
    if (z2 == bot) return kNoInput;
    return p.join(vl, m ^ z2);
  }

  Index mf_query(Index i) const {
    if (db_branch(i)) return i;
    const Index v = feistel_from_databases(i, u(i));
    if (v == kNoInput) return i;
    const Index y = layout.digit(i, ypos) ^ table[layout.digit(i, ompos)][v];
    return layout.with_digit(i, ypos, y);
  }

  Index mf_flip(Index i) const {
    if (db_branch(i)) return i;
    const Index pr = layout.digit(i, pipos), orank = layout.digit(i, ompos);
    const Index h = layout.digit(i, hpos), f = layout.digit(i, fpos);
    Index j = layout.with_digit(i, pipos, inverse_rank[orank]);
    j = layout.with_digit(j, ompos, inverse_rank[pr]);
    j = layout.with_digit(j, hpos, f);
    return layout.with_digit(j, fpos, h);
  }
};

}  // namespace

MfOperators build_mf_operators(const PurificationSpace& space) {
  auto acc = std::make_shared<SpaceAccess>(space);
  const RegisterLayout& layout = space.layout();
  MfOperators ops;
  auto query = [acc](Index i) { return acc->mf_query(i); };
  ops.mfP = LinearOp::permutation(layout, query, query);
  auto flip = [acc](Index i) { return acc->mf_flip(i); };
  ops.mfF = LinearOp::permutation(layout, flip, flip);
  auto cflip = [acc](Index i) { return acc->layout.digit(i, acc->bpos) == 1 ? acc->mf_flip(i) : i; };
  ops.ctrl_mfF = LinearOp::permutation(layout, cflip, cflip);
  CompressionOps u =
      standard_compression_ops(space.params(), layout, [acc](Index i) { return acc->u_or_none(i); }, space.t_max());
  ops.mfC = u.compression();
  ops.mfC_dag = u.decompression();
  LinearOp forward = compose({ops.mfC, ops.mfP, ops.mfC_dag});
  ops.cmfO = split_on_bit(layout, "B", forward, compose({ops.mfF, forward, ops.mfF}));
  return ops;
}

// ---- sophisticated states ----

SophisticatedBasis::SophisticatedBasis(const PurificationSpace& space, const TwirlDistribution& dist) : space_(space) {
  const FeistelParams p = space.params();
  if (dist.params().n != p.n) throw std::invalid_argument("twirl and space sizes differ");
  const auto& sup = dist.support();
  std::map<std::vector<Index>, std::vector<TripleDB>> extensions;
  const Index block_dim = space.block().dimension();
  for (Index t = 0; t <= std::min<Index>(space.t_max(), p.size()); ++t) {
    for (const Database& i : injective_databases(p, t)) {
      std::vector<std::pair<const TwirlPair*, double>> members;
      double total = 0;
      for (const auto& [tw, w] : sup)
        if (resolves(p, tw, i)) {
          members.push_back({&tw, w});
          total += w;
        }
      if (members.empty() || total <= 0) continue;
      const int id = static_cast<int>(dbs_.size());
      dbs_.push_back(i);
      std::vector<std::pair<Index, double>> entries;
      for (const auto& [tw, w] : members) {
        const Database a = star_action(tw->pi, i, tw->omega);
        auto it = extensions.find(a.table());
        if (it == extensions.end()) it = extensions.emplace(a.table(), extend_database_all(p, a)).first;
        const double amp = std::sqrt(w / total / static_cast<double>(it->second.size()));
        for (const TripleDB& d : it->second) {
          const Index local = space.purification_index(tw->pi, tw->omega, d, 0) % block_dim;
          entries.emplace_back(local, amp);
          lookup_[local] = {id, amp};
        }
      }
      entries_.push_back(std::move(entries));
    }
  }
  families_.assign(p.size(), {});
  for (Index x = 0; x < p.size(); ++x) {
    for (std::size_t id = 0; id < dbs_.size(); ++id) {
      const Database& i = dbs_[id];
      if (i.defined(x) || i.size() >= p.half()) continue;
      Family fam{static_cast<int>(id), {}};
      bool complete = true;
      for (Index y = 0; y < p.size() && complete; ++y) {
        if (i.in_image(y)) continue;
        const int c = find(assign(i, x, y, DbKind::Injective));
        if (c < 0) complete = false;
        fam.completions.push_back(c);
      }
      if (complete) families_[x].push_back(std::move(fam));
    }
  }
}

int SophisticatedBasis::find(const Database& i) const {
  for (std::size_t k = 0; k < dbs_.size(); ++k)
    if (dbs_[k] == i) return static_cast<int>(k);
  return -1;
}

SparseState SophisticatedBasis::state(const Database& i, Index rest) const {
  const int id = find(i);
  if (id < 0) throw std::invalid_argument("no twirl resolves " + i.to_text());
  SparseState out(space_.layout());
  add_state(out, rest, id, 1.0);
  return out;
}

absl::flat_hash_map<std::pair<Index, int>, cplx> SophisticatedBasis::overlaps(const SparseState& psi) const {
  absl::flat_hash_map<std::pair<Index, int>, cplx> out;
  const Index dim = space_.block().dimension();
  for (const auto& [i, a] : psi.amplitudes()) {
    auto it = lookup_.find(i % dim);
    if (it == lookup_.end()) continue;
    out[{i / dim, it->second.first}] += it->second.second * a;
  }
  return out;
}

void SophisticatedBasis::add_state(SparseState& out, Index rest, int id, cplx c) const {
  const Index base = rest * space_.block().dimension();
  for (const auto& [local, amp] : entries_.at(id)) out.add(base + local, c * amp);
}

SparseState sophisticated_state(const PurificationSpace& space, const TwirlDistribution& dist, const Database& i,
                                Index rest) {
  return SophisticatedBasis(space, dist).state(i, rest);
}

LinearOp build_intertwiner(const SophisticatedBasis& basis) {
  const PurificationSpace& space = basis.space();
  if (!space.tagged()) throw std::invalid_argument("the intertwiner needs a tagged space");
  auto b = std::make_shared<SophisticatedBasis>(basis);
  const Index dim = space.block().dimension();
  auto db_ids = std::make_shared<absl::flat_hash_map<Index, int>>();
  for (std::size_t k = 0; k < basis.databases().size(); ++k)
    (*db_ids)[space.database_index(basis.databases()[k], 0)] = static_cast<int>(k);
  const RegisterLayout layout = space.layout();
  // The domain is the purification branch: database-branch input is
  // dropped, and the adjoint projects back onto the purification branch.
  auto purification_part = [space](const SparseState& s) {
    SparseState out(s.layout());
    out.reserve(s.support_size());
    for (const auto& [i, a] : s.amplitudes())
      if (!space.on_database_branch(i)) out.set(i, a);
    return out;
  };
  auto forward = [b, space, purification_part](const SparseState& s) {
    SparseState out = purification_part(s);
    for (const auto& [key, c] : b->overlaps(s)) {
      b->add_state(out, key.first, key.second, -c);
      out.add(space.database_index(b->databases()[key.second], key.first), c);
    }
    out.prune();
    return out;
  };
  auto adjoint = [b, db_ids, dim, purification_part](const SparseState& s) {
    SparseState out = purification_part(s);
    for (const auto& [key, c] : b->overlaps(s)) b->add_state(out, key.first, key.second, -c);
    for (const auto& [i, a] : s.amplitudes()) {
      auto it = db_ids->find(i % dim);
      if (it != db_ids->end()) b->add_state(out, i / dim, it->second, a);
    }
    out.prune();
    return out;
  };
  return LinearOp(layout, forward, adjoint);
}

// ---- projectors ----

namespace {

// Sum over complete families at the query point of each rest index of the
// per-family action `fn(rest, family, coefficients)`.
template <typename Fn>
void for_each_family(const SophisticatedBasis& b, const absl::flat_hash_map<std::pair<Index, int>, cplx>& ov,
                     std::size_t xpos_adv, Fn fn) {
  absl::flat_hash_map<Index, bool> rests;
  for (const auto& [key, c] : ov) rests[key.first] = true;
  const RegisterLayout& adv = b.space().adversary();
  for (const auto& [rest, unused] : rests) {
    const Index x = adv.digit(rest, xpos_adv);
    for (const auto& fam : b.families(x)) {
      auto get = [&](int id) {
        auto it = ov.find({rest, id});
        return it == ov.end() ? cplx(0) : it->second;
      };
      fn(rest, fam, get);
    }
  }
}

LinearOp tag_zero(const PurificationSpace& space) {
  if (!space.tagged()) return LinearOp::identity(space.layout());
  const std::size_t pos = space.layout().position("Tag");
  const RegisterLayout layout = space.layout();
  return LinearOp::diagonal(layout, [layout, pos](Index i) { return layout.digit(i, pos) == 0 ? 1.0 : 0.0; });
}

// Elegant projector: per complete family, the family span minus |+>.
LinearOp elegant_projector(const SophisticatedBasis& basis) {
  auto b = std::make_shared<SophisticatedBasis>(basis);
  const std::size_t xpos = basis.space().adversary().position("X");
  auto act = [b, xpos](const SparseState& s) {
    SparseState out(s.layout());
    for_each_family(*b, b->overlaps(s), xpos, [&](Index rest, const SophisticatedBasis::Family& fam, auto get) {
      b->add_state(out, rest, fam.base, get(fam.base));
      cplx sum = 0;
      for (int c : fam.completions) sum += get(c);
      const double k = static_cast<double>(fam.completions.size());
      for (int c : fam.completions) b->add_state(out, rest, c, get(c) - sum / k);
    });
    out.prune();
    return out;
  };
  return LinearOp(basis.space().layout(), act, act);
}

// Ideal compression: per complete family, swap |P(I)> with |+_{x,P(I)}>.
LinearOp ideal_compression(const SophisticatedBasis& basis) {
  auto b = std::make_shared<SophisticatedBasis>(basis);
  const std::size_t xpos = basis.space().adversary().position("X");
  auto act = [b, xpos](const SparseState& s) {
    SparseState out = s;
    for_each_family(*b, b->overlaps(s), xpos, [&](Index rest, const SophisticatedBasis::Family& fam, auto get) {
      const double k = static_cast<double>(fam.completions.size());
      const cplx a = get(fam.base);
      cplx plus = 0;
      for (int c : fam.completions) plus += get(c);
      plus /= std::sqrt(k);
      b->add_state(out, rest, fam.base, plus - a);
      for (int c : fam.completions) b->add_state(out, rest, c, (a - plus) / std::sqrt(k));
    });
    out.prune();
    return out;
  };
  return LinearOp(basis.space().layout(), act, act);
}

}  // namespace

SubspaceProjectors build_subspace_projectors(const SophisticatedBasis& basis) {
  const PurificationSpace& space = basis.space();
  const RegisterLayout& layout = space.layout();
  auto b = std::make_shared<SophisticatedBasis>(basis);
  auto acc = std::make_shared<SpaceAccess>(space);
  SubspaceProjectors out;
  auto soph = [b](const SparseState& s) {
    SparseState r(s.layout());
    for (const auto& [key, c] : b->overlaps(s)) b->add_state(r, key.first, key.second, c);
    r.prune();
    return r;
  };
  out.soph = LinearOp(layout, soph, soph);

  const FunctionOracleConfig round{space.params().half(), space.params().half(), space.params().half()};
  out.val = compose({tag_zero(space), validity_projector(round, layout, "H"), validity_projector(round, layout, "K"),
                     validity_projector(round, layout, "F")});

  out.indb = LinearOp::diagonal(layout, [acc](Index i) {
    if (acc->db_branch(i)) return 0.0;
    return acc->feistel_from_databases(i, acc->u(i)) == kNoInput ? 0.0 : 1.0;
  });
  MfOperators mf = build_mf_operators(space);
  out.qval = compose({mf.ctrl_mfF, mf.mfC, out.indb, mf.mfC_dag, mf.ctrl_mfF});
  out.ele = elegant_projector(basis);
  out.fele = compose({mf.ctrl_mfF, out.ele, mf.ctrl_mfF});

  // D allows pi(x): tabulated over (H, K, F, u).
  const FeistelParams p = space.params();
  const Index rcard = acc->rc.cardinality();
  auto heart = std::make_shared<std::vector<char>>(rcard * rcard * rcard * p.size(), 0);
  for (Index h = 0; h < rcard; ++h)
    for (Index k = 0; k < rcard; ++k)
      for (Index f = 0; f < rcard; ++f) {
        const TripleDB d{acc->rc.decode(h), acc->rc.decode(k), acc->rc.decode(f)};
        const Database a = supported(p, d);
        for (Index u = 0; u < p.size(); ++u) (*heart)[((h * rcard + k) * rcard + f) * p.size() + u] = allows(p, a, u);
      }
  out.heart = LinearOp::diagonal(layout, [acc, heart, rcard](Index i) {
    if (acc->db_branch(i)) return 0.0;
    const Index h = acc->layout.digit(i, acc->hpos), k = acc->layout.digit(i, acc->kpos),
                f = acc->layout.digit(i, acc->fpos);
    return (*heart)[((h * rcard + k) * rcard + f) * acc->p.size() + acc->u(i)] ? 1.0 : 0.0;
  });
  return out;
}

IdealOperators build_ideal_operators(const SophisticatedBasis& basis) {
  const PurificationSpace& space = basis.space();
  auto acc = std::make_shared<SpaceAccess>(space);
  MfOperators mf = build_mf_operators(space);
  IdealOperators out;
  out.mfC_bar = ideal_compression(basis);
  LinearOp forward = compose({out.mfC_bar, mf.mfP, out.mfC_bar});
  out.cmfO_bar = split_on_bit(space.layout(), "B", forward, compose({mf.mfF, forward, mf.mfF}));
  out.mfC_tilde = canonical_compression_ops(space.params(), space.layout(),
                                            [acc](Index i) { return acc->u_or_none(i); }, space.t_max())
                      .compression();
  return out;
}

BranchOperators build_branch_operators(const PurificationSpace& space) {
  if (!space.tagged()) throw std::invalid_argument("branch operators need a tagged space");
  const RegisterLayout layout = space.layout();
  const DbCodec codec = space.injective_codec();
  const std::size_t tpos = layout.position("Tag"), xpos = layout.position("X"), dpos = layout.position("D");
  BranchOperators out;
  out.pC = swap_compression_indexed(
      layout, "D", codec, [=](Index i) { return layout.digit(i, tpos) == 1 ? layout.digit(i, xpos) : kNoInput; },
      [=](Index base, Index) {
        const Index raw = layout.digit(base, dpos);
        std::vector<Index> v;
        for (Index y = 0; y < codec.n(); ++y)
          if (!codec.in_image(raw, y)) v.push_back(y);
        return v;
      },
      codec.m());
  out.P = build_purified_query(layout, codec);
  out.F = build_flip(PermOracleConfig{codec.n(), codec.n()}, layout);
  LinearOp forward = compose({out.pC, out.P, out.pC});
  out.cP = split_on_bit(layout, "B", forward, compose({out.F, forward, out.F}));
  return out;
}

double operator_norm_on_span(const LinearOp& op, const std::vector<SparseState>& states) {
  std::vector<SparseState> basis;
  for (const auto& s : states) {
    SparseState v = s;
    for (const auto& e : basis) v -= e.inner(v) * e;
    const double nv = v.norm();
    if (nv > 1e-10) basis.push_back((1.0 / nv) * v);
  }
  if (basis.empty()) return 0.0;
  std::vector<SparseState> images;
  for (const auto& e : basis) images.push_back(op.apply(e));
  Matrix g(images.size(), images.size());
  for (std::size_t a = 0; a < images.size(); ++a)
    for (std::size_t c = 0; c < images.size(); ++c) g(a, c) = images[a].inner(images[c]);
  const auto ev = hermitian_eigenvalues(g);
  return std::sqrt(std::max(0.0, *std::max_element(ev.begin(), ev.end())));
}

// ---- cromulence ----

Estimate wilson_estimate(std::size_t successes, std::size_t trials, double z) {
  Estimate e;
  e.trials = trials;
  if (trials == 0) {
    e.value = e.lo = e.hi = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  const double n = static_cast<double>(trials), ph = static_cast<double>(successes) / n;
  const double denom = 1 + z * z / n;
  const double center = (ph + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom;
  e.value = ph;
  e.lo = std::max(0.0, center - half);
  e.hi = std::min(1.0, center + half);
  return e;
}

namespace {

Estimate exact_estimate(double num, double den) {
  Estimate e;
  e.exact = true;
  e.value = den > 0 ? num / den : std::numeric_limits<double>::quiet_NaN();
  e.lo = e.hi = e.value;
  return e;
}

nlohmann::json estimate_json(const Estimate& e) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  return {{"value", num(e.value)}, {"lo", num(e.lo)}, {"hi", num(e.hi)}, {"trials", e.trials}, {"exact", e.exact}};
}

}  // namespace

nlohmann::json CromulenceReport::to_json() const {
  return {{"resolve", estimate_json(resolve)},
          {"left_marginal", estimate_json(left_marginal)},
          {"joint", estimate_json(joint)},
          {"ratio_deviation", ratio_deviation},
          {"ratio_pairs", ratio_pairs},
          {"y", y},
          {"y2", y2},
          {"l", l}};
}

CromulenceReport estimate_cromulence(const TwirlDistribution& dist, const Database& i, Index x, std::size_t budget,
                                     std::uint64_t seed, const CromulenceOptions& opts) {
  const FeistelParams p = dist.params();
  const Index N = p.size();
  if (i.m() != N || i.n() != N) throw std::invalid_argument("database size differs from the twirl");
  if (i.defined(x)) throw std::invalid_argument("x must be outside Dom(I)");
  std::vector<Index> free_y;
  for (Index y = 0; y < N; ++y)
    if (!i.in_image(y)) free_y.push_back(y);
  CromulenceReport rep;
  rep.y = opts.y == kNoInput ? free_y.at(0) : opts.y;
  rep.y2 = opts.y2 == kNoInput ? free_y.at(free_y.size() > 1 ? 1 : 0) : opts.y2;
  rep.l = opts.l;
  if (i.in_image(rep.y) || i.in_image(rep.y2) || rep.y == rep.y2) throw std::invalid_argument("bad y, y'");
  const double t = static_cast<double>(i.size());

  auto marg = [&](const TwirlPair& tw) { return p.left(tw.omega.inverse()(rep.y)) == rep.l; };
  auto joint = [&](const TwirlPair& tw) {
    const Permutation inv = tw.omega.inverse();
    return p.left(inv(rep.y)) == rep.l && p.left(inv(rep.y2)) == rep.l;
  };
  auto v_size = [&](const TwirlPair& tw) {
    return static_cast<double>(allowed_values(p, star_action(tw.pi, i, tw.omega), tw.pi(x)).values.size());
  };

  if (dist.enumerable() && dist.support().size() <= kExactSupportLimit) {
    double pi_mass = 0, px = 0, pm = 0, pj = 0;
    for (const auto& [tw, w] : dist.support()) {
      if (!resolves(p, tw, i)) continue;
      pi_mass += w;
      if (!resolves_at(p, tw, i, x)) continue;
      px += w;
      if (marg(tw)) pm += w;
      if (joint(tw)) pj += w;
    }
    if (pi_mass <= 0) throw std::runtime_error("no twirl resolves I");
    rep.resolve = exact_estimate(px, pi_mass);
    rep.left_marginal = exact_estimate(pm, px);
    rep.joint = exact_estimate(pj, px);
    for (Index y : free_y) {
      const Database j = assign(i, x, y, DbKind::Injective);
      double pj_mass = 0;
      for (const auto& [tw, w] : dist.support())
        if (resolves(p, tw, j)) pj_mass += w;
      for (const auto& [tw, w] : dist.support()) {
        if (!resolves(p, tw, j)) continue;
        const double a = std::sqrt(w / pj_mass / (static_cast<double>(N) - t));
        const double b = std::sqrt(w / px / v_size(tw));
        rep.ratio_deviation = std::max(rep.ratio_deviation, std::abs(a - b) / b);
        ++rep.ratio_pairs;
      }
    }
    return rep;
  }

  Philox rng(seed);
  std::size_t ni = 0, nx = 0, nm = 0, nj = 0;
  std::vector<std::size_t> nres(free_y.size(), 0);
  std::vector<std::vector<double>> vsizes(free_y.size());
  for (std::size_t s = 0; s < budget; ++s) {
    const TwirlPair tw = dist.sample(rng);
    for (std::size_t k = 0; k < free_y.size(); ++k)
      if (resolves(p, tw, assign(i, x, free_y[k], DbKind::Injective))) {
        ++nres[k];
        const double v = v_size(tw);
        if (std::find(vsizes[k].begin(), vsizes[k].end(), v) == vsizes[k].end()) vsizes[k].push_back(v);
      }
    if (!resolves(p, tw, i)) continue;
    ++ni;
    if (!resolves_at(p, tw, i, x)) continue;
    ++nx;
    if (marg(tw)) ++nm;
    if (joint(tw)) ++nj;
  }
  if (budget == 0 || static_cast<double>(ni) / static_cast<double>(budget) < opts.acceptance_floor)
    throw std::runtime_error("acceptance rate of R_I below the floor");
  rep.resolve = wilson_estimate(nx, ni);
  rep.left_marginal = wilson_estimate(nm, nx);
  rep.joint = wilson_estimate(nj, nx);
  // The twirl weight cancels in the ratio: only Pr[R_{x,I}], Pr[R_{I[x->y]}]
  // and |V| remain.
  const double px = static_cast<double>(nx) / static_cast<double>(budget);
  for (std::size_t k = 0; k < free_y.size(); ++k) {
    if (nres[k] == 0 || nx == 0) continue;
    const double pj = static_cast<double>(nres[k]) / static_cast<double>(budget);
    for (double v : vsizes[k]) {
      const double ratio = std::sqrt(v * px / ((static_cast<double>(N) - t) * pj));
      rep.ratio_deviation = std::max(rep.ratio_deviation, std::abs(ratio - 1));
    }
    rep.ratio_pairs += nres[k];
  }
  return rep;
}

// ---- shifted sampler ----

Feistel2Databases right_shift_pi(const Feistel2Databases& d, Index s) {
  Feistel2Databases o = d;
  const Index h = d.pi1.m();
  o.pi1 = Database(h, h);
  o.pi2 = Database(h, h);
  for (const auto& [w, z] : d.pi1.pairs()) o.pi1 = assign(o.pi1, w, z ^ s);
  for (const auto& [z, w] : d.pi2.pairs()) o.pi2 = assign(o.pi2, z ^ s, w);
  return o;
}

Feistel2Databases right_shift_omega(const Feistel2Databases& d, Index s) {
  Feistel2Databases o = d;
  const Index h = d.om1.m();
  o.om1 = Database(h, h);
  o.om2 = Database(h, h);
  for (const auto& [w, z] : d.om1.pairs()) o.om1 = assign(o.om1, w, z ^ s);
  for (const auto& [z, w] : d.om2.pairs()) o.om2 = assign(o.om2, z ^ s, w);
  return o;
}

Feistel2Databases left_shift(const Feistel2Databases& d, Index s) {
  Feistel2Databases o = d;
  const Index h = d.pi2.m();
  o.pi2 = Database(h, h);
  o.om2 = Database(h, h);
  for (const auto& [z, w] : d.pi2.pairs()) o.pi2 = assign(o.pi2, z, w ^ s);
  for (const auto& [z, w] : d.om2.pairs()) o.om2 = assign(o.om2, z, w ^ s);
  return o;
}

TwirlPair twirl_from_rounds(const FeistelParams& p, const Feistel2Databases& d) {
  for (const Database* db : {&d.pi1, &d.pi2, &d.om1, &d.om2})
    if (db->size() != p.half()) throw std::invalid_argument("round databases must be total");
  return {feistel2(p, d.pi1.table(), d.pi2.table()), feistel2(p, d.om1.table(), d.om2.table()).inverse()};
}

namespace {

// Fills d1(a_L) and d2(a_R xor d1(a_L)) if undefined; returns Feist(a).
Index fill_two_rounds(const FeistelParams& p, Database& d1, Database& d2, Index a, Philox& rng) {
  const Index l = p.left(a), r = p.right(a);
  if (!d1.defined(l)) d1 = assign(d1, l, rng.below(p.half()));
  const Index z = r ^ d1.at(l);
  if (!d2.defined(z)) d2 = assign(d2, z, rng.below(p.half()));
  return p.join(l ^ d2.at(z), z);
}

void fill_rest(const FeistelParams& p, Database& d, Philox& rng) {
  for (Index w = 0; w < p.half(); ++w)
    if (!d.defined(w)) d = assign(d, w, rng.below(p.half()));
}

}  // namespace

TwirlPair shifted_sampler(const FeistelParams& p, const Database& i, Philox& rng, std::size_t max_attempts) {
  const Index h = p.half();
  Feistel2Databases d;
  bool found = false;
  for (std::size_t attempt = 0; attempt < max_attempts && !found; ++attempt) {
    d = {Database(h, h), Database(h, h), Database(h, h), Database(h, h)};
    std::vector<std::pair<Index, Index>> a;
    for (const auto& [x, y] : i.pairs()) {
      const Index u = fill_two_rounds(p, d.pi1, d.pi2, x, rng);
      const Index v = fill_two_rounds(p, d.om1, d.om2, y, rng);
      a.emplace_back(u, v);
    }
    found = is_allowable(p, Database::from_pairs(p.size(), p.size(), a));
  }
  if (!found) throw std::runtime_error("step-1 conditioning unsatisfiable");
  d = right_shift_pi(d, rng.below(h));
  d = right_shift_omega(d, rng.below(h));
  for (Database* db : {&d.pi1, &d.pi2, &d.om1, &d.om2}) fill_rest(p, *db, rng);
  d = left_shift(d, rng.below(h));
  return twirl_from_rounds(p, d);
}

TwirlPair rejection_sampler(const TwirlDistribution& dist, const Database& i, Philox& rng, std::size_t max_attempts) {
  for (std::size_t k = 0; k < max_attempts; ++k) {
    TwirlPair t = dist.sample(rng);
    if (resolves(dist.params(), t, i)) return t;
  }
  throw std::runtime_error("rejection sampling found no resolving pair");
}

// ---- soundness experiment ----

nlohmann::json ExperimentReport::to_json() const {
  return {{"experiment", experiment}, {"n", n},           {"q", q},
          {"dist", dist},             {"seed", seed},     {"values", values},
          {"ci", ci},                 {"runtime_ms", runtime_ms}};
}

ExperimentReport run_soundness_experiment(const TwirlDistribution& dist, const AdversaryCircuit& adv,
                                          std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const FeistelParams p = dist.params();
  if (p.n != 1) throw std::length_error("the soundness experiment runs only at n = 1");
  validate(adv);
  const std::size_t q = adv.queries();
  if (q > 3) throw std::length_error("at most 3 queries are supported");
  const Index N = p.size();
  const std::vector<std::string> keep = register_names(adv.layout);

  // Views of the fixed-permutation oracles, by rank.
  const auto perms = all_permutations(N);
  std::vector<DensityMatrix> views;
  const SparseState init = SparseState::basis(adv.layout, adv.initial);
  for (const auto& phi : perms) views.push_back(partial_trace(run_queries(adv, init, permutation_oracle(adv.layout, phi)), keep));
  auto mixture = [&](const std::vector<double>& mass) {
    DensityMatrix rho = DensityMatrix::zeros(views[0].dimension());
    for (std::size_t r = 0; r < mass.size(); ++r)
      if (mass[r] != 0) {
        DensityMatrix v = views[r];
        v *= mass[r];
        rho += v;
      }
    return rho;
  };
  const std::vector<double> uniform_mass(perms.size(), 1.0 / static_cast<double>(perms.size()));
  std::vector<double> masked_mass(perms.size(), 0.0);
  const auto fs = all_round_functions(p);
  const double per = 1.0 / static_cast<double>(fs.size() * fs.size() * fs.size());
  for (const auto& [tw, w] : dist.support())
    for (const auto& h : fs)
      for (const auto& k : fs)
        for (const auto& f : fs)
          masked_mass[permutation_rank(masked_feistel_permutation(p, {tw.pi, tw.omega, h, k, f}))] += w * per;
  const DensityMatrix rho_uniform = mixture(uniform_mass), rho_masked = mixture(masked_mass),
                      rho_f7 = mixture(feistel_distribution(p, 7));

  PurificationSpace space(p, adv.layout, p.half(), true);
  SophisticatedBasis basis(space, dist);
  const MfOperators mf = build_mf_operators(space);
  const BranchOperators br = build_branch_operators(space);
  const LinearOp inter = build_intertwiner(basis);
  SparseState psi = basis.state(Database(N, N), adv.initial);
  SparseState chi = SparseState::basis(space.layout(), space.database_index(Database(N, N), adv.initial));
  std::vector<double> devs;
  for (std::size_t k = 0; k <= q; ++k) {
    psi = apply_step(adv, k, psi);
    chi = apply_step(adv, k, chi);
    if (k == q) break;
    const SparseState next = mf.cmfO.apply(psi);
    // cP is the identity on the purification branch; apply it to the
    // database branch only.
    SparseState before = inter.apply(psi), branch(space.layout());
    for (const auto& [i, a] : before.amplitudes())
      if (space.on_database_branch(i)) branch.set(i, a);
    before -= branch;
    before += br.cP.apply(branch);
    devs.push_back(distance(inter.apply(next), before));
    psi = next;
    chi = br.cP.apply(chi);
    if (psi.support_size() > kSoundnessStateCap) throw std::length_error("state budget exceeded");
  }
  double sum = 0;
  for (double d : devs) sum += d;
  const DensityMatrix rho_cmfo = partial_trace(psi, keep), rho_cp = partial_trace(chi, keep);

  ExperimentReport rep;
  rep.experiment = "soundness";
  rep.n = p.n;
  rep.q = q;
  rep.dist = dist.name();
  rep.seed = seed;
  rep.values = {{"masked_vs_cp", trace_distance(rho_masked, rho_cp)},
                {"masked_vs_uniform", trace_distance(rho_masked, rho_uniform)},
                {"feistel7_vs_uniform", trace_distance(rho_f7, rho_uniform)},
                {"cmfo_vs_masked", trace_distance(rho_cmfo, rho_masked)},
                {"hybrid_deviations", devs},
                {"hybrid_sum", sum},
                {"final_hybrid_distance", distance(inter.apply(psi), chi)}};
  rep.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace qperm
