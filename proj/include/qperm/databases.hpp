// databases.hpp
// Partial functions, partial injective functions and permutations, their
// register encodings, capped enumeration, and diagonal projectors.

#pragma once

#include "qperm/qlinalg.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qperm {

enum class DbKind { Function, Injective };

// Partial function [m] -> [n]; the undefined value is encoded as n.
class Database {
 public:
  Database() = default;
  Database(Index m, Index n);  // everywhere undefined
  static Database from_pairs(Index m, Index n, const std::vector<std::pair<Index, Index>>& pairs);
  static Database from_table(Index n, std::vector<Index> table);

  Index m() const { return m_; }
  Index n() const { return n_; }
  Index bottom() const { return n_; }
  const std::vector<Index>& table() const { return table_; }

  bool defined(Index x) const { return table_.at(x) != n_; }
  Index at(Index x) const { return table_.at(x); }
  std::size_t size() const;
  std::vector<Index> domain() const;
  std::vector<Index> image() const;
  std::vector<std::pair<Index, Index>> pairs() const;
  bool in_image(Index y) const;
  bool is_injective() const;
  // Preimage of y, or n if none (injective databases).
  Index preimage(Index y) const;

  std::string to_text() const;  // "[x→y, ...]" sorted by x

  bool operator==(const Database& o) const { return m_ == o.m_ && n_ == o.n_ && table_ == o.table_; }
  bool operator!=(const Database& o) const { return !(*this == o); }

 private:
  Index m_ = 0;
  Index n_ = 0;
  std::vector<Index> table_;
};

// D[x -> y]. For the injective kind any other x' with D(x') = y is erased.
Database assign(const Database& d, Index x, Index y, DbKind kind = DbKind::Function);
Database flip(const Database& injective);
bool is_valid(const Database& d, DbKind kind);

// Fixed-width register encoding: digit x holds D(x), x = 0 most significant.
class DbCodec {
 public:
  DbCodec() = default;
  DbCodec(Index m, Index n);
  Index m() const { return m_; }
  Index n() const { return n_; }
  Index cardinality() const { return card_; }
  Index get(Index raw, Index x) const { return (raw / pow_[x]) % (n_ + 1); }
  Index set(Index raw, Index x, Index v) const { return raw - get(raw, x) * pow_[x] + v * pow_[x]; }
  Index empty() const { return empty_; }
  std::size_t size(Index raw) const;
  Index encode(const Database& d) const;
  Database decode(Index raw) const;
  // Preimage of y in an injective raw database, or n if none.
  Index preimage(Index raw, Index y) const;
  bool in_image(Index raw, Index y) const { return preimage(raw, y) != n_; }
  Index flip(Index raw) const;  // m == n only

 private:
  Index m_ = 0, n_ = 0, card_ = 1, empty_ = 0;
  std::vector<Index> pow_;
};

class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<Index> table);  // validates bijectivity
  static Permutation identity(Index n);
  Index size() const { return table_.size(); }
  Index operator()(Index x) const { return table_.at(x); }
  Permutation inverse() const;
  const std::vector<Index>& table() const { return table_; }
  bool operator==(const Permutation& o) const { return table_ == o.table_; }
  bool operator<(const Permutation& o) const { return table_ < o.table_; }

 private:
  std::vector<Index> table_;
};

Permutation compose(const Permutation& a, const Permutation& b);  // a(b(x))
std::vector<Permutation> all_permutations(Index n);                // lexicographic
// Lexicographic rank of a permutation in all_permutations order.
Index permutation_rank(const Permutation& p);
Permutation permutation_unrank(Index n, Index rank);
Index factorial(Index n);
Index binomial(Index n, Index k);

inline constexpr std::size_t kDefaultSpaceCap = 5'000'000;

// Databases of size <= t_max in DatabaseSpace order, without raw encodings
// (usable when (N+1)^M overflows). `size_start` receives the size offsets.
std::vector<Database> enumerate_databases(DbKind kind, Index M, Index N, Index t_max,
                                          std::size_t cap = kDefaultSpaceCap,
                                          std::vector<std::size_t>* size_start = nullptr);

// Databases of size <= t_max, ordered by size, then domain subset
// (lexicographic), then values (lexicographic).
class DatabaseSpace {
 public:
  DatabaseSpace(DbKind kind, Index M, Index N, Index t_max, std::size_t cap = kDefaultSpaceCap);

  DbKind kind() const { return kind_; }
  Index M() const { return M_; }
  Index N() const { return N_; }
  Index t_max() const { return t_max_; }
  const DbCodec& codec() const { return codec_; }
  std::size_t count() const { return items_.size(); }
  const Database& at(std::size_t i) const { return items_.at(i); }
  const std::vector<Database>& items() const { return items_; }
  Index raw(std::size_t i) const { return raws_.at(i); }
  const std::vector<Index>& raws() const { return raws_; }
  // Position of a database in the enumeration; throws if absent.
  std::size_t index_of(const Database& d) const;
  bool contains_raw(Index raw) const { return pos_.count(raw) != 0; }
  std::size_t index_of_raw(Index raw) const;
  // Enumeration positions [begin, end) of databases of size exactly t.
  std::pair<std::size_t, std::size_t> size_range(Index t) const;

  // Single-register layout holding the raw database encoding.
  RegisterLayout layout(const std::string& name = "D") const;

 private:
  DbKind kind_;
  Index M_, N_, t_max_;
  DbCodec codec_;
  std::vector<Database> items_;
  std::vector<Index> raws_;
  std::vector<std::size_t> size_start_;
  std::unordered_map<Index, std::size_t> pos_;
};

LinearOp size_projector(const DatabaseSpace& space, Index t, bool at_most = false, const std::string& reg = "D");
LinearOp consistency_projector(const DatabaseSpace& space, Index x, Index y, const std::string& reg = "D");
SparseState uniform_completion_state(const DatabaseSpace& space, const Database& base, Index x,
                                     const std::string& reg = "D");
// Number of enumerated basis databases fixed by a diagonal projector.
std::size_t projector_rank(const DatabaseSpace& space, const LinearOp& diagonal_projector);

}  // namespace qperm
