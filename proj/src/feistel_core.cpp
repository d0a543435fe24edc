// feistel_core.cpp

#include "qperm/feistel_core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace qperm {

namespace {

Database with_entry(const Database& d, Index x, Index y) {
  std::vector<Index> table = d.table();
  table.at(x) = y;
  return Database::from_table(d.n(), std::move(table));
}

std::vector<Index> sorted_unique(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void require_canonical(const FeistelParams& p, const TripleDB& d) {
  if (!is_canonical(p, d)) throw std::invalid_argument("triple is not canonical");
}

bool left_in_domain(const FeistelParams& p, const Database& a, Index l) {
  for (Index x : a.domain())
    if (p.left(x) == l) return true;
  return false;
}

}  // namespace

FeistelParams::FeistelParams(unsigned half_bits) : n(half_bits) {
  if (n == 0 || n > 8) throw std::invalid_argument("half width must be in 1..8 bits");
}

Index feistel_round(const FeistelParams& p, Index x, const RoundFunction& g, RoundDirection dir) {
  if (g.size() != p.half()) throw std::invalid_argument("round function has the wrong domain");
  const Index l = p.left(x), r = p.right(x);
  if (dir == RoundDirection::LeftToRight) return p.join(l, r ^ g.at(l));
  return p.join(l ^ g.at(r), r);
}

Permutation feistel_permutation(const FeistelParams& p, const std::vector<RoundFunction>& rounds) {
  if (rounds.empty()) throw std::invalid_argument("at least one round is required");
  std::vector<Index> table(p.size());
  for (Index x = 0; x < p.size(); ++x) {
    Index y = x;
    for (std::size_t i = 0; i < rounds.size(); ++i)
      y = feistel_round(p, y, rounds[i], i % 2 == 0 ? RoundDirection::LeftToRight : RoundDirection::RightToLeft);
    table[x] = y;
  }
  return Permutation(std::move(table));
}

std::vector<RoundFunction> all_round_functions(const FeistelParams& p) {
  const Index h = p.half();
  Index count = 1;
  for (Index i = 0; i < h; ++i) count *= h;
  std::vector<RoundFunction> out;
  out.reserve(count);
  for (Index c = 0; c < count; ++c) {
    RoundFunction g(h);
    Index rest = c;
    for (Index i = h; i-- > 0;) {
      g[i] = rest % h;
      rest /= h;
    }
    out.push_back(std::move(g));
  }
  return out;
}

RoundFunction random_round_function(const FeistelParams& p, Philox& rng) {
  RoundFunction g(p.half());
  for (auto& v : g) v = rng.below(p.half());
  return g;
}

Index masked_feistel_eval(const FeistelParams& p, const MaskedFeistelSpec& spec, Index x) {
  const Index u = spec.pi(x);
  const Index m = p.right(u) ^ spec.h.at(p.left(u));
  const Index vl = p.left(u) ^ spec.k.at(m);
  const Index vr = m ^ spec.f.at(vl);
  return spec.omega(p.join(vl, vr));
}

Index masked_feistel_inverse(const FeistelParams& p, const MaskedFeistelSpec& spec, Index y) {
  const Index v = spec.omega.inverse()(y);
  const Index m = p.right(v) ^ spec.f.at(p.left(v));
  const Index ul = p.left(v) ^ spec.k.at(m);
  const Index ur = m ^ spec.h.at(ul);
  return spec.pi.inverse()(p.join(ul, ur));
}

Permutation masked_feistel_permutation(const FeistelParams& p, const MaskedFeistelSpec& spec) {
  std::vector<Index> table(p.size());
  for (Index x = 0; x < p.size(); ++x) table[x] = masked_feistel_eval(p, spec, x);
  return Permutation(std::move(table));
}

TripleDB TripleDB::empty(const FeistelParams& p) {
  const Database e(p.half(), p.half());
  return {e, e, e};
}

std::size_t TripleDB::size() const { return std::max({h.size(), k.size(), f.size()}); }

bool TripleDB::operator<(const TripleDB& o) const {
  return std::tie(h.table(), k.table(), f.table()) < std::tie(o.h.table(), o.k.table(), o.f.table());
}

std::string TripleDB::to_text() const { return "H" + h.to_text() + " K" + k.to_text() + " F" + f.to_text(); }

std::vector<Chain> find_chains(const FeistelParams& p, const TripleDB& d) {
  std::vector<Chain> out;
  for (Index ul = 0; ul < p.half(); ++ul) {
    if (!d.h.defined(ul)) continue;
    for (Index ur = 0; ur < p.half(); ++ur) {
      const Index m = d.h.at(ul) ^ ur;
      if (!d.k.defined(m)) continue;
      const Index vl = ul ^ d.k.at(m);
      if (!d.f.defined(vl)) continue;
      out.push_back({p.join(ul, ur), m, p.join(vl, d.f.at(vl) ^ m)});
    }
  }
  return out;
}

int semichain_length(const FeistelParams& p, const TripleDB& d, Index u, ChainDirection dir) {
  if (u >= p.size()) throw std::out_of_range("string out of range");
  const Index l = p.left(u), r = p.right(u);
  const Database& first = dir == ChainDirection::Rightward ? d.h : d.f;
  const Database& last = dir == ChainDirection::Rightward ? d.f : d.h;
  if (!first.defined(l)) return 0;
  const Index m = first.at(l) ^ r;
  if (!d.k.defined(m)) return 1;
  if (!last.defined(l ^ d.k.at(m))) return 2;
  return 3;
}

bool chains_collide(const FeistelParams& p, const Chain& a, const Chain& b) {
  if (a == b) return false;
  return a.m == b.m || p.left(a.u) == p.left(b.u) || p.left(a.v) == p.left(b.v);
}

bool is_canonical(const FeistelParams& p, const TripleDB& d) {
  const auto chains = find_chains(p, d);
  for (std::size_t i = 0; i < chains.size(); ++i)
    for (std::size_t j = i + 1; j < chains.size(); ++j)
      if (chains_collide(p, chains[i], chains[j])) return false;
  auto uses = [&](const Database& db, auto key) {
    for (Index x : db.domain()) {
      const auto c = std::count_if(chains.begin(), chains.end(), [&](const Chain& ch) { return key(ch) == x; });
      if (c != 1) return false;
    }
    return true;
  };
  return uses(d.h, [&](const Chain& c) { return p.left(c.u); }) && uses(d.k, [](const Chain& c) { return c.m; }) &&
         uses(d.f, [&](const Chain& c) { return p.left(c.v); });
}

Database supported(const FeistelParams& p, const TripleDB& d) {
  std::vector<std::pair<Index, Index>> pairs;
  for (const auto& c : find_chains(p, d)) pairs.emplace_back(c.u, c.v);
  return Database::from_pairs(p.size(), p.size(), pairs);
}

TripleDB remove_chain(const FeistelParams& p, const TripleDB& d, Index u) {
  for (const auto& c : find_chains(p, d)) {
    if (c.u != u) continue;
    const Index bot = p.half();
    return {with_entry(d.h, p.left(c.u), bot), with_entry(d.k, c.m, bot), with_entry(d.f, p.left(c.v), bot)};
  }
  throw std::invalid_argument("no chain starts at the given input");
}

AllowabilityReport allowability(const FeistelParams& p, const Database& i) {
  if (i.m() != p.size() || i.n() != p.size()) throw std::invalid_argument("database is not over 2n-bit strings");
  if (!i.is_injective()) throw std::invalid_argument("database is not injective");
  AllowabilityReport r;
  const auto pairs = i.pairs();
  for (std::size_t a = 0; a < pairs.size(); ++a)
    for (std::size_t b = a + 1; b < pairs.size(); ++b) {
      if (p.left(pairs[a].first) == p.left(pairs[b].first)) r.input_left_collision = true;
      if (p.left(pairs[a].second) == p.left(pairs[b].second)) r.output_left_collision = true;
    }
  for (const auto& [x, y] : pairs)
    for (const auto& [x1, y1] : pairs)
      for (const auto& [x2, y2] : pairs) {
        if (x1 == x && y2 == y) continue;
        if ((p.left(x) ^ p.left(y)) == (p.left(x1) ^ p.left(y2))) r.internal_left_collision = true;
      }
  return r;
}

bool is_allowable(const FeistelParams& p, const Database& i) { return allowability(p, i).allowable(); }

TripleDB extend_database(const FeistelParams& p, const Database& i, const std::vector<Index>& zs) {
  if (!is_allowable(p, i)) throw std::invalid_argument("database is not allowable");
  const auto pairs = i.pairs();
  if (zs.size() != pairs.size()) throw std::invalid_argument("one choice per pair is required");
  TripleDB d = TripleDB::empty(p);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto [u, v] = pairs[j];
    const Index z = zs[j];
    if (z >= p.half()) throw std::out_of_range("choice out of range");
    const Index m = p.right(u) ^ z;
    if (d.k.defined(m)) throw std::invalid_argument("middle value already in Dom(D_k)");
    d.h = with_entry(d.h, p.left(u), z);
    d.k = with_entry(d.k, m, p.left(u) ^ p.left(v));
    d.f = with_entry(d.f, p.left(v), p.right(v) ^ m);
  }
  return d;
}

std::vector<TripleDB> extend_database_all(const FeistelParams& p, const Database& i) {
  if (!is_allowable(p, i)) throw std::invalid_argument("database is not allowable");
  const std::size_t t = i.size();
  const auto pairs = i.pairs();
  std::vector<Index> zs;
  std::vector<bool> used(p.half(), false);  // middle values taken
  TripleSet out;
  std::function<void()> rec = [&]() {
    if (zs.size() == t) {
      out.insert(extend_database(p, i, zs));
      return;
    }
    const Index ur = p.right(pairs[zs.size()].first);
    for (Index z = 0; z < p.half(); ++z) {
      if (used[ur ^ z]) continue;
      used[ur ^ z] = true;
      zs.push_back(z);
      rec();
      zs.pop_back();
      used[ur ^ z] = false;
    }
  };
  rec();
  return {out.begin(), out.end()};
}

bool allows(const FeistelParams& p, const Database& a, Index u) {
  if (a.defined(u)) return false;
  for (Index v = 0; v < p.size(); ++v)
    if (!a.in_image(v) && is_allowable(p, assign(a, u, v, DbKind::Injective))) return true;
  return false;
}

AllowedValues allowed_values(const FeistelParams& p, const Database& a, Index u) {
  if (a.defined(u)) throw std::invalid_argument("input already in Dom(A)");
  AllowedValues out;
  for (Index v = 0; v < p.size(); ++v)
    if (!a.in_image(v) && is_allowable(p, assign(a, u, v, DbKind::Injective))) out.values.push_back(v);
  if (out.values.empty()) throw std::invalid_argument("input is not allowed");
  for (Index v : out.values) out.lefts.push_back(p.left(v));
  out.lefts = sorted_unique(out.lefts);
  const auto t = static_cast<long long>(a.size());
  if (static_cast<long long>(out.lefts.size()) < static_cast<long long>(p.half()) - 2 * t * t - 2 * t)
    throw std::logic_error("allowed left halves below the counting bound");
  for (Index l : out.lefts)
    for (Index r = 0; r < p.half(); ++r)
      if (!std::binary_search(out.values.begin(), out.values.end(), p.join(l, r)))
        throw std::logic_error("allowed values not closed under right halves");
  return out;
}

namespace {

// Left halves l unused by Dom(A) and allowed by A.
std::vector<Index> free_lefts(const FeistelParams& p, const Database& a) {
  std::vector<Index> out;
  for (Index l = 0; l < p.half(); ++l)
    if (!left_in_domain(p, a, l) && allows(p, a, p.join(l, 0))) out.push_back(l);
  return out;
}

// Calls visit(level, triple) for every one-, two- and three-extension of d.
void for_each_extension(const FeistelParams& p, const TripleDB& d,
                        const std::function<void(int, const TripleDB&)>& visit) {
  require_canonical(p, d);
  const Database a = supported(p, d);
  for (Index l : free_lefts(p, a)) {
    const auto lefts = allowed_values(p, a, p.join(l, 0)).lefts;
    for (Index z = 0; z < p.half(); ++z) {
      TripleDB one = d;
      one.h = with_entry(d.h, l, z);
      visit(1, one);
      for (Index m = 0; m < p.half(); ++m) {
        if (one.k.defined(m)) continue;
        for (Index lw : lefts) {
          const Index w = l ^ lw;
          TripleDB two = one;
          two.k = with_entry(one.k, m, w);
          visit(2, two);
          for (Index z2 = 0; z2 < p.half(); ++z2) {
            TripleDB three = two;
            three.f = with_entry(two.f, lw, z2);
            visit(3, three);
          }
        }
      }
    }
  }
}

TripleSet extensions_at(const FeistelParams& p, const TripleDB& d, int level) {
  TripleSet out;
  for_each_extension(p, d, [&](int l, const TripleDB& e) {
    if (l == level) out.insert(e);
  });
  return out;
}

void require_fresh_allowed(const FeistelParams& p, const TripleDB& d, Index u) {
  require_canonical(p, d);
  const Database a = supported(p, d);
  if (a.defined(u)) throw std::invalid_argument("input already supported");
  if (!allows(p, a, u)) throw std::invalid_argument("input is not allowed");
}

Index supported_at(const FeistelParams& p, const TripleDB& d, Index u) {
  const Database a = supported(p, d);
  if (!a.defined(u)) throw std::invalid_argument("input is not supported");
  return a.at(u);
}

}  // namespace

TripleSet one_extensions(const FeistelParams& p, const TripleDB& d) { return extensions_at(p, d, 1); }
TripleSet two_extensions(const FeistelParams& p, const TripleDB& d) { return extensions_at(p, d, 2); }
TripleSet three_extensions(const FeistelParams& p, const TripleDB& d) { return extensions_at(p, d, 3); }

TripleSet up_pipe_h(const FeistelParams& p, const TripleDB& d, Index u) {
  require_fresh_allowed(p, d, u);
  TripleSet out{d};
  for (Index z = 0; z < p.half(); ++z) {
    if (d.k.defined(p.right(u) ^ z)) continue;
    TripleDB e = d;
    e.h = with_entry(d.h, p.left(u), z);
    out.insert(e);
  }
  return out;
}

TripleSet up_pipe_hk(const FeistelParams& p, const TripleDB& d, Index u) {
  const auto lefts = allowed_values(p, supported(p, d), u).lefts;
  TripleSet out;
  for (const auto& e : up_pipe_h(p, d, u)) {
    out.insert(e);
    if (e == d) continue;
    const Index m = p.right(u) ^ e.h.at(p.left(u));
    for (Index l : lefts) {
      TripleDB e2 = e;
      e2.k = with_entry(e.k, m, p.left(u) ^ l);
      out.insert(e2);
    }
  }
  return out;
}

TripleSet up_pipe_hkf(const FeistelParams& p, const TripleDB& d, Index u) {
  TripleSet out;
  for (const auto& e : up_pipe_hk(p, d, u)) {
    out.insert(e);
    if (!e.h.defined(p.left(u))) continue;
    const Index m = p.right(u) ^ e.h.at(p.left(u));
    if (!e.k.defined(m)) continue;
    const Index vl = p.left(u) ^ e.k.at(m);
    for (Index z = 0; z < p.half(); ++z) {
      TripleDB e3 = e;
      e3.f = with_entry(e.f, vl, z);
      out.insert(e3);
    }
  }
  return out;
}

TripleSet down_pipe_h(const FeistelParams& p, const TripleDB& d, Index u) {
  require_canonical(p, d);
  supported_at(p, d, u);
  TripleSet out;
  for (Index z = 0; z <= p.half(); ++z) {
    if (z != p.half() && d.k.defined(p.right(u) ^ z)) continue;
    TripleDB e = d;
    e.h = with_entry(d.h, p.left(u), z);
    out.insert(e);
  }
  return out;
}

TripleSet down_pipe_k(const FeistelParams& p, const TripleDB& d, Index u) {
  require_canonical(p, d);
  supported_at(p, d, u);
  const Index m = p.right(u) ^ d.h.at(p.left(u));
  const auto lefts = allowed_values(p, supported(p, remove_chain(p, d, u)), u).lefts;
  TripleSet out;
  std::vector<Index> ws{p.half()};
  for (Index l : lefts) ws.push_back(p.left(u) ^ l);
  for (Index w : ws) {
    TripleDB e = d;
    e.k = with_entry(d.k, m, w);
    out.insert(e);
  }
  return out;
}

TripleSet down_pipe_f(const FeistelParams& p, const TripleDB& d, Index u) {
  require_canonical(p, d);
  const Index vl = p.left(supported_at(p, d, u));
  TripleSet out;
  for (Index z = 0; z <= p.half(); ++z) {
    TripleDB e = d;
    e.f = with_entry(d.f, vl, z);
    out.insert(e);
  }
  return out;
}

TripleSet assignment_set(const FeistelParams& p, const TripleDB& d, Index u, Index v) {
  require_fresh_allowed(p, d, u);
  TripleSet out;
  for (const auto& e : three_extensions(p, d)) {
    const Database a = supported(p, e);
    if (a.defined(u) && a.at(u) == v && remove_chain(p, e, u) == d) out.insert(e);
  }
  return out;
}

std::vector<Database> injective_databases(const FeistelParams& p, Index t) {
  const Index n = p.size();
  if (t > n) return {};
  std::vector<Database> out;
  std::vector<Index> dom, table(n, n);
  std::vector<bool> used(n, false);
  std::function<void(std::size_t)> values = [&](std::size_t j) {
    if (j == dom.size()) {
      out.push_back(Database::from_table(n, table));
      return;
    }
    for (Index y = 0; y < n; ++y) {
      if (used[y]) continue;
      used[y] = true;
      table[dom[j]] = y;
      values(j + 1);
      table[dom[j]] = n;
      used[y] = false;
    }
  };
  std::function<void(Index)> domains = [&](Index next) {
    if (dom.size() == t) {
      values(0);
      return;
    }
    for (Index x = next; x < n; ++x) {
      dom.push_back(x);
      domains(x + 1);
      dom.pop_back();
    }
  };
  domains(0);
  return out;
}

std::vector<Database> allowable_databases(const FeistelParams& p, Index t) {
  std::vector<Database> out;
  for (auto& d : injective_databases(p, t))
    if (is_allowable(p, d)) out.push_back(std::move(d));
  return out;
}

std::vector<TripleDB> canonical_triples(const FeistelParams& p, Index t) {
  std::vector<TripleDB> out;
  for (const auto& i : allowable_databases(p, t))
    for (auto& d : extend_database_all(p, i)) out.push_back(std::move(d));
  return out;
}

CensusRow chain_census(const FeistelParams& p, Index t) {
  CensusRow row;
  row.n = p.n;
  row.t = t;
  bool first = true;
  for (const auto& d : canonical_triples(p, t)) {
    std::array<Index, 4> right{}, left{};
    for (Index u = 0; u < p.size(); ++u) {
      ++right[semichain_length(p, d, u, ChainDirection::Rightward)];
      ++left[semichain_length(p, d, u, ChainDirection::Leftward)];
    }
    if (left != right) row.leftward_matches = false;
    const Index chains = find_chains(p, d).size();
    if (right[3] != chains) row.uniform = false;
    if (first) {
      row.chains = chains;
      row.semi2 = right[2];
      row.semi1 = right[1];
      row.semi0 = right[0];
      first = false;
    } else if (row.chains != chains || row.semi2 != right[2] || row.semi1 != right[1] || row.semi0 != right[0]) {
      row.uniform = false;
    }
    ++row.triples;
  }
  return row;
}

std::string census_csv(const std::vector<CensusRow>& rows) {
  std::ostringstream os;
  os << "n,t,chains,semi2,semi1,semi0\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.t << ',' << r.chains << ',' << r.semi2 << ',' << r.semi1 << ',' << r.semi0 << '\n';
  return os.str();
}

RegisterLayout triple_layout(const FeistelParams& p, const TripleRegisters& regs) {
  const Index card = p.round_codec().cardinality();
  return RegisterLayout({{regs.h, card}, {regs.k, card}, {regs.f, card}});
}

Index encode_triple(const FeistelParams& p, const RegisterLayout& layout, const TripleDB& d, Index base,
                    const TripleRegisters& regs) {
  const DbCodec codec = p.round_codec();
  Index i = layout.with_digit(base, layout.position(regs.h), codec.encode(d.h));
  i = layout.with_digit(i, layout.position(regs.k), codec.encode(d.k));
  return layout.with_digit(i, layout.position(regs.f), codec.encode(d.f));
}

TripleDB decode_triple(const FeistelParams& p, const RegisterLayout& layout, Index index,
                       const TripleRegisters& regs) {
  const DbCodec codec = p.round_codec();
  return {codec.decode(layout.digit(index, layout.position(regs.h))),
          codec.decode(layout.digit(index, layout.position(regs.k))),
          codec.decode(layout.digit(index, layout.position(regs.f)))};
}

SparseState canonical_superposition(const FeistelParams& p, const RegisterLayout& layout, const Database& a,
                                    const TripleRegisters& regs) {
  const auto triples = extend_database_all(p, a);
  SparseState s(layout);
  const double amp = 1.0 / std::sqrt(static_cast<double>(triples.size()));
  for (const auto& d : triples) s.add(encode_triple(p, layout, d, 0, regs), amp);
  return s;
}

LinearOp CompressionOps::compression() const { return compose({h, k, f}); }
LinearOp CompressionOps::decompression() const { return compose({f, k, h}); }

namespace {

struct TripleAccess {
  FeistelParams p;
  RegisterLayout layout;
  DbCodec codec;
  std::size_t hpos, kpos, fpos;
  InputSelector u_of;

  TripleAccess(const FeistelParams& params, const RegisterLayout& l, InputSelector sel, const TripleRegisters& regs)
      : p(params),
        layout(l),
        codec(params.round_codec()),
        hpos(l.position(regs.h)),
        kpos(l.position(regs.k)),
        fpos(l.position(regs.f)),
        u_of(std::move(sel)) {}

  Index u(Index i) const { return u_of(i); }
  Index h_input(Index i) const {
    const Index ui = u(i);
    return ui == kNoInput ? kNoInput : p.left(ui);
  }
  Index h(Index i, Index x) const { return codec.get(layout.digit(i, hpos), x); }
  Index k(Index i, Index x) const { return codec.get(layout.digit(i, kpos), x); }
  Index bot() const { return p.half(); }

  // Input of the K decompression, or kNoInput if D_h(u_L) is undefined.
  Index k_input(Index i) const {
    const Index ui = u(i);
    if (ui == kNoInput) return kNoInput;
    const Index z = h(i, p.left(ui));
    return z == bot() ? kNoInput : p.right(ui) ^ z;
  }
  Index f_input(Index i) const {
    const Index m = k_input(i);
    if (m == kNoInput) return kNoInput;
    const Index w = k(i, m);
    return w == bot() ? kNoInput : p.left(u(i)) ^ w;
  }
};

std::vector<Index> all_of(Index n) {
  std::vector<Index> v(n);
  for (Index i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

static InputSelector input_selector(const FeistelParams& p, const RegisterLayout& layout, Index u, const std::string& ureg) {
  if (ureg.empty()) {
    if (u >= p.size()) throw std::out_of_range("input out of range");
    return [u](Index) { return u; };
  }
  const std::size_t upos = layout.position(ureg);
  if (layout.cardinality(upos) != p.size()) throw std::invalid_argument("input register size differs");
  return [layout, upos](Index i) { return layout.digit(i, upos); };
}

CompressionOps standard_compression_ops(const FeistelParams& p, const RegisterLayout& layout, Index u, Index t_max,
                                        const TripleRegisters& regs, const std::string& ureg) {
  return standard_compression_ops(p, layout, input_selector(p, layout, u, ureg), t_max, regs);
}

CompressionOps standard_compression_ops(const FeistelParams& p, const RegisterLayout& layout, InputSelector u_of,
                                        Index t_max, const TripleRegisters& regs) {
  const TripleAccess acc(p, layout, std::move(u_of), regs);
  const std::vector<Index> values = all_of(p.half());
  auto full = [values](Index, Index) { return values; };
  CompressionOps ops;
  ops.h = swap_compression_indexed(
      layout, regs.h, acc.codec, [acc](Index i) { return acc.h_input(i); }, full, t_max);
  ops.k = swap_compression_indexed(layout, regs.k, acc.codec, [acc](Index i) { return acc.k_input(i); }, full, t_max);
  ops.f = swap_compression_indexed(layout, regs.f, acc.codec, [acc](Index i) { return acc.f_input(i); }, full, t_max);
  return ops;
}

CompressionOps canonical_compression_ops(const FeistelParams& p, const RegisterLayout& layout, Index u, Index t_max,
                                         const TripleRegisters& regs, const std::string& ureg) {
  return canonical_compression_ops(p, layout, input_selector(p, layout, u, ureg), t_max, regs);
}

CompressionOps canonical_compression_ops(const FeistelParams& p, const RegisterLayout& layout, InputSelector u_of,
                                         Index t_max, const TripleRegisters& regs) {
  const TripleAccess acc(p, layout, std::move(u_of), regs);
  CompressionOps ops = standard_compression_ops(p, layout, acc.u_of, t_max, regs);
  // H(u, D) = {z : u_R xor z not in Dom(D_k)}.
  auto h_set = [acc](Index base, Index) {
    std::vector<Index> out;
    const Index ur = acc.p.right(acc.u(base));
    for (Index z = 0; z < acc.p.half(); ++z)
      if (acc.k(base, ur ^ z) == acc.bot()) out.push_back(z);
    return out;
  };
  // K(u, D) = {w : u_L xor w in L_{u, Supp(D'')}} where D'' is the canonical
  // triple that D extends at u_L; empty (identity) when D is no such extension.
  auto k_set = [acc, regs](Index base, Index) {
    const Index ui = acc.u(base);
    TripleDB d = decode_triple(acc.p, acc.layout, base, regs);
    d.h = with_entry(d.h, acc.p.left(ui), acc.bot());
    std::vector<Index> out;
    if (!is_canonical(acc.p, d)) return out;
    const Database a = supported(acc.p, d);
    if (left_in_domain(acc.p, a, acc.p.left(ui)) || !allows(acc.p, a, ui)) return out;
    for (Index l : allowed_values(acc.p, a, ui).lefts) out.push_back(acc.p.left(ui) ^ l);
    return sorted_unique(out);
  };
  ops.h = swap_compression_indexed(
      layout, regs.h, acc.codec, [acc](Index i) { return acc.h_input(i); }, h_set, t_max);
  ops.k = swap_compression_indexed(layout, regs.k, acc.codec, [acc](Index i) { return acc.k_input(i); }, k_set, t_max);
  return ops;
}

std::vector<Index> triple_columns(const FeistelParams& p, const RegisterLayout& layout, Index t,
                                  const TripleRegisters& regs) {
  DatabaseSpace space(DbKind::Function, p.half(), p.half(), t);
  const std::size_t hpos = layout.position(regs.h), kpos = layout.position(regs.k), fpos = layout.position(regs.f);
  std::vector<Index> out;
  out.reserve(space.count() * space.count() * space.count());
  for (Index a : space.raws())
    for (Index b : space.raws())
      for (Index c : space.raws())
        out.push_back(layout.with_digit(layout.with_digit(layout.with_digit(0, hpos, a), kpos, b), fpos, c));
  return out;
}

}  // namespace qperm
