// databases.cpp

#include "qperm/databases.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qperm {

// ---------------------------------------------------------------- Database

Database::Database(Index m, Index n) : m_(m), n_(n), table_(m, n) {}

Database Database::from_pairs(Index m, Index n, const std::vector<std::pair<Index, Index>>& pairs) {
  Database d(m, n);
  for (const auto& [x, y] : pairs) {
    if (x >= m || y >= n) throw std::out_of_range("database pair out of range");
    d.table_[x] = y;
  }
  return d;
}

Database Database::from_table(Index n, std::vector<Index> table) {
  Database d;
  d.m_ = table.size();
  d.n_ = n;
  for (Index v : table)
    if (v > n) throw std::out_of_range("database value out of range");
  d.table_ = std::move(table);
  return d;
}

std::size_t Database::size() const {
  return static_cast<std::size_t>(std::count_if(table_.begin(), table_.end(), [&](Index v) { return v != n_; }));
}

std::vector<Index> Database::domain() const {
  std::vector<Index> out;
  for (Index x = 0; x < m_; ++x)
    if (table_[x] != n_) out.push_back(x);
  return out;
}

std::vector<Index> Database::image() const {
  std::vector<Index> out;
  for (Index v : table_)
    if (v != n_) out.push_back(v);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::pair<Index, Index>> Database::pairs() const {
  std::vector<std::pair<Index, Index>> out;
  for (Index x = 0; x < m_; ++x)
    if (table_[x] != n_) out.emplace_back(x, table_[x]);
  return out;
}

bool Database::in_image(Index y) const { return std::find(table_.begin(), table_.end(), y) != table_.end() && y != n_; }

bool Database::is_injective() const {
  std::vector<bool> seen(n_, false);
  for (Index v : table_) {
    if (v == n_) continue;
    if (seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Index Database::preimage(Index y) const {
  for (Index x = 0; x < m_; ++x)
    if (table_[x] == y) return x;
  return n_;
}

std::string Database::to_text() const {
  std::ostringstream os;
  os << '[';
  bool first = true;
  for (const auto& [x, y] : pairs()) {
    if (!first) os << ", ";
    os << x << "→" << y;
    first = false;
  }
  os << ']';
  return os.str();
}

Database assign(const Database& d, Index x, Index y, DbKind kind) {
  if (x >= d.m()) throw std::out_of_range("assign: input out of range");
  if (y > d.n()) throw std::out_of_range("assign: value out of range");
  std::vector<Index> t = d.table();
  if (kind == DbKind::Injective && y != d.n()) {
    for (Index xp = 0; xp < d.m(); ++xp)
      if (xp != x && t[xp] == y) t[xp] = d.n();
  }
  t[x] = y;
  return Database::from_table(d.n(), std::move(t));
}

Database flip(const Database& i) {
  if (i.m() != i.n()) throw std::invalid_argument("flip needs a square injective database");
  if (!i.is_injective()) throw std::invalid_argument("flip needs an injective database");
  std::vector<Index> t(i.n(), i.m());
  for (const auto& [x, y] : i.pairs()) t[y] = x;
  return Database::from_table(i.m(), std::move(t));
}

bool is_valid(const Database& d, DbKind kind) {
  for (Index v : d.table())
    if (v > d.n()) return false;
  return kind == DbKind::Function || d.is_injective();
}

// ---------------------------------------------------------------- codec

DbCodec::DbCodec(Index m, Index n) : m_(m), n_(n), pow_(m) {
  card_ = 1;
  for (Index i = 0; i < m; ++i) {
    if (card_ > std::numeric_limits<Index>::max() / (n + 1)) throw std::overflow_error("database encoding too wide");
    card_ *= (n + 1);
  }
  Index p = 1;
  for (Index x = m; x-- > 0;) {
    pow_[x] = p;
    p *= (n + 1);
  }
  empty_ = 0;
  for (Index x = 0; x < m; ++x) empty_ += n * pow_[x];
}

std::size_t DbCodec::size(Index raw) const {
  std::size_t s = 0;
  for (Index x = 0; x < m_; ++x)
    if (get(raw, x) != n_) ++s;
  return s;
}

Index DbCodec::encode(const Database& d) const {
  if (d.m() != m_ || d.n() != n_) throw std::invalid_argument("database shape does not match codec");
  Index raw = 0;
  for (Index x = 0; x < m_; ++x) raw += d.at(x) * pow_[x];
  return raw;
}

Database DbCodec::decode(Index raw) const {
  std::vector<Index> t(m_);
  for (Index x = 0; x < m_; ++x) t[x] = get(raw, x);
  return Database::from_table(n_, std::move(t));
}

Index DbCodec::preimage(Index raw, Index y) const {
  for (Index x = 0; x < m_; ++x)
    if (get(raw, x) == y) return x;
  return n_;
}

Index DbCodec::flip(Index raw) const {
  if (m_ != n_) throw std::invalid_argument("flip needs a square codec");
  Index out = empty_;
  for (Index x = 0; x < m_; ++x) {
    Index y = get(raw, x);
    if (y != n_) out = set(out, y, x);
  }
  return out;
}

// ---------------------------------------------------------------- permutations

Permutation::Permutation(std::vector<Index> table) : table_(std::move(table)) {
  std::vector<bool> seen(table_.size(), false);
  for (Index v : table_) {
    if (v >= table_.size() || seen[v]) throw std::invalid_argument("table is not a bijection");
    seen[v] = true;
  }
}

Permutation Permutation::identity(Index n) {
  std::vector<Index> t(n);
  std::iota(t.begin(), t.end(), Index{0});
  return Permutation(std::move(t));
}

Permutation Permutation::inverse() const {
  std::vector<Index> t(table_.size());
  for (Index x = 0; x < table_.size(); ++x) t[table_[x]] = x;
  return Permutation(std::move(t));
}

Permutation compose(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) throw std::invalid_argument("permutation size mismatch");
  std::vector<Index> t(a.size());
  for (Index x = 0; x < a.size(); ++x) t[x] = a(b(x));
  return Permutation(std::move(t));
}

std::vector<Permutation> all_permutations(Index n) {
  if (n > 10) throw std::length_error("too many permutations to enumerate");
  std::vector<Index> t(n);
  std::iota(t.begin(), t.end(), Index{0});
  std::vector<Permutation> out;
  do {
    out.emplace_back(t);
  } while (std::next_permutation(t.begin(), t.end()));
  return out;
}

Index factorial(Index n) {
  Index f = 1;
  for (Index i = 2; i <= n; ++i) f *= i;
  return f;
}

Index binomial(Index n, Index k) {
  if (k > n) return 0;
  Index r = 1;
  for (Index i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Index permutation_rank(const Permutation& p) {
  const Index n = p.size();
  Index rank = 0;
  std::vector<bool> used(n, false);
  for (Index i = 0; i < n; ++i) {
    Index smaller = 0;
    for (Index v = 0; v < p(i); ++v)
      if (!used[v]) ++smaller;
    rank += smaller * factorial(n - 1 - i);
    used[p(i)] = true;
  }
  return rank;
}

Permutation permutation_unrank(Index n, Index rank) {
  std::vector<Index> avail(n);
  std::iota(avail.begin(), avail.end(), Index{0});
  std::vector<Index> t;
  for (Index i = 0; i < n; ++i) {
    Index f = factorial(n - 1 - i);
    Index k = rank / f;
    rank %= f;
    t.push_back(avail.at(k));
    avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return Permutation(std::move(t));
}

// ---------------------------------------------------------------- spaces

namespace {

double closed_form_count(DbKind kind, Index M, Index N, Index t_max) {
  double total = 0;
  for (Index t = 0; t <= t_max; ++t) {
    if (kind == DbKind::Function)
      total += static_cast<double>(binomial(M, t)) * std::pow(static_cast<double>(N), static_cast<double>(t));
    else
      total += static_cast<double>(binomial(M, t)) * static_cast<double>(binomial(N, t)) * static_cast<double>(factorial(t));
  }
  return total;
}

// Calls f for each sorted t-subset of [n] in lexicographic order.
template <class F>
void for_each_subset(Index n, Index t, F&& f) {
  std::vector<Index> c(t);
  std::iota(c.begin(), c.end(), Index{0});
  if (t > n) return;
  for (;;) {
    f(c);
    Index i = t;
    while (i > 0 && c[i - 1] == n - t + i - 1) --i;
    if (i == 0) return;
    ++c[i - 1];
    for (Index j = i; j < t; ++j) c[j] = c[j - 1] + 1;
  }
}

}  // namespace

std::vector<Database> enumerate_databases(DbKind kind, Index M, Index N, Index t_max, std::size_t cap,
                                          std::vector<std::size_t>* size_start) {
  if (t_max > M) throw std::invalid_argument("t_max exceeds the domain size");
  if (kind == DbKind::Injective && M != N) throw std::invalid_argument("injective spaces need M == N");
  if (closed_form_count(kind, M, N, t_max) > static_cast<double>(cap))
    throw std::length_error("database space exceeds the enumeration cap");
  std::vector<Database> items;
  for (Index t = 0; t <= t_max; ++t) {
    if (size_start) size_start->push_back(items.size());
    for_each_subset(M, t, [&](const std::vector<Index>& dom) {
      std::vector<Index> vals(t, 0);
      for (;;) {
        bool ok = true;
        if (kind == DbKind::Injective) {
          std::vector<Index> s = vals;
          std::sort(s.begin(), s.end());
          ok = std::adjacent_find(s.begin(), s.end()) == s.end();
        }
        if (ok) {
          std::vector<Index> tab(M, N);
          for (Index i = 0; i < t; ++i) tab[dom[i]] = vals[i];
          items.push_back(Database::from_table(N, std::move(tab)));
        }
        Index i = t;
        while (i > 0 && vals[i - 1] == N - 1) vals[--i] = 0;
        if (i == 0) break;
        ++vals[i - 1];
      }
    });
  }
  if (size_start) size_start->push_back(items.size());
  return items;
}

DatabaseSpace::DatabaseSpace(DbKind kind, Index M, Index N, Index t_max, std::size_t cap)
    : kind_(kind), M_(M), N_(N), t_max_(t_max), codec_(M, N) {
  items_ = enumerate_databases(kind, M, N, t_max, cap, &size_start_);
  raws_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    raws_.push_back(codec_.encode(items_[i]));
    pos_.emplace(raws_.back(), i);
  }
}

std::size_t DatabaseSpace::index_of(const Database& d) const { return index_of_raw(codec_.encode(d)); }

std::size_t DatabaseSpace::index_of_raw(Index raw) const {
  auto it = pos_.find(raw);
  if (it == pos_.end()) throw std::out_of_range("database not in the capped space");
  return it->second;
}

std::pair<std::size_t, std::size_t> DatabaseSpace::size_range(Index t) const {
  if (t > t_max_) throw std::out_of_range("size outside the capped space");
  return {size_start_[t], size_start_[t + 1]};
}

RegisterLayout DatabaseSpace::layout(const std::string& name) const {
  return RegisterLayout({{name, codec_.cardinality()}});
}

LinearOp size_projector(const DatabaseSpace& space, Index t, bool at_most, const std::string& reg) {
  if (t > space.t_max()) throw std::out_of_range("size projector index outside the capped space");
  DbCodec codec = space.codec();
  return LinearOp::diagonal(space.layout(reg), [codec, t, at_most](Index raw) {
    std::size_t s = codec.size(raw);
    return (at_most ? s <= t : s == t) ? 1.0 : 0.0;
  });
}

LinearOp consistency_projector(const DatabaseSpace& space, Index x, Index y, const std::string& reg) {
  if (x >= space.M() || y >= space.N()) throw std::out_of_range("consistency projector pair out of range");
  DbCodec codec = space.codec();
  return LinearOp::diagonal(space.layout(reg), [codec, x, y](Index raw) { return codec.get(raw, x) == y ? 1.0 : 0.0; });
}

SparseState uniform_completion_state(const DatabaseSpace& space, const Database& base, Index x, const std::string& reg) {
  if (base.defined(x)) throw std::invalid_argument("base database already defined at x");
  SparseState s(space.layout(reg));
  std::vector<Index> ys;
  for (Index y = 0; y < space.N(); ++y)
    if (space.kind() == DbKind::Function || !base.in_image(y)) ys.push_back(y);
  if (ys.empty()) throw std::invalid_argument("injective image is full");
  const double amp = 1.0 / std::sqrt(static_cast<double>(ys.size()));
  for (Index y : ys) s.add(space.codec().encode(assign(base, x, y, space.kind())), amp);
  return s;
}

std::size_t projector_rank(const DatabaseSpace& space, const LinearOp& p) {
  std::size_t r = 0;
  for (Index raw : space.raws()) {
    SparseState out = p.apply(SparseState::basis(p.layout(), raw));
    if (std::abs(out.amplitude(raw) - 1.0) < 1e-12) ++r;
  }
  return r;
}

}  // namespace qperm
