// feistel_core.hpp
// Feistel rounds, masked Feistel evaluation, chains in database triples,
// canonicity, allowability, database extension, extension and pipe sets,
// and the canonical compression operators G.
//
// Bit convention: for a 2n-bit string x, x_L is the high n bits and x_R the
// low n bits of its integer encoding.

#pragma once

#include "qperm/cfo.hpp"
#include "qperm/databases.hpp"
#include "qperm/rng.hpp"

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace qperm {

struct FeistelParams {
  unsigned n = 1;

  explicit FeistelParams(unsigned half_bits = 1);
  Index half() const { return Index{1} << n; }         // 2^n
  Index size() const { return Index{1} << (2 * n); }   // 2^{2n}
  Index left(Index x) const { return x >> n; }
  Index right(Index x) const { return x & (half() - 1); }
  Index join(Index l, Index r) const { return (l << n) | r; }
  DbCodec round_codec() const { return DbCodec(half(), half()); }
};

using RoundFunction = std::vector<Index>;  // total function [2^n] -> [2^n]

enum class RoundDirection { LeftToRight, RightToLeft };

// Left-to-right: x_L || (x_R xor g(x_L)); right-to-left: (x_L xor g(x_R)) || x_R.
Index feistel_round(const FeistelParams& p, Index x, const RoundFunction& g, RoundDirection dir);
// Rounds alternate, the first one left-to-right.
Permutation feistel_permutation(const FeistelParams& p, const std::vector<RoundFunction>& rounds);
// All 2^{n 2^n} round functions in lexicographic order of their tables.
std::vector<RoundFunction> all_round_functions(const FeistelParams& p);
RoundFunction random_round_function(const FeistelParams& p, Philox& rng);

struct MaskedFeistelSpec {
  Permutation pi, omega;
  RoundFunction h, k, f;
};

// y with u = pi(x), v = omega^{-1}(y), m = u_R xor h(u_L), v_L = u_L xor k(m),
// v_R = m xor f(v_L).
Index masked_feistel_eval(const FeistelParams& p, const MaskedFeistelSpec& spec, Index x);
Index masked_feistel_inverse(const FeistelParams& p, const MaskedFeistelSpec& spec, Index y);
Permutation masked_feistel_permutation(const FeistelParams& p, const MaskedFeistelSpec& spec);

struct TripleDB {
  Database h, k, f;

  static TripleDB empty(const FeistelParams& p);
  std::size_t size() const;  // largest component size
  bool operator==(const TripleDB& o) const { return h == o.h && k == o.k && f == o.f; }
  bool operator!=(const TripleDB& o) const { return !(*this == o); }
  bool operator<(const TripleDB& o) const;
  std::string to_text() const;  // "H[..] K[..] F[..]"
};

struct Chain {
  Index u = 0, m = 0, v = 0;
  bool operator==(const Chain& o) const { return u == o.u && m == o.m && v == o.v; }
};

enum class ChainDirection { Rightward, Leftward };

std::vector<Chain> find_chains(const FeistelParams& p, const TripleDB& d);
// Rightward from input u or leftward from output u; 3 means a full chain.
int semichain_length(const FeistelParams& p, const TripleDB& d, Index u, ChainDirection dir);
bool chains_collide(const FeistelParams& p, const Chain& a, const Chain& b);
// No colliding chains and every database entry lies on exactly one chain.
bool is_canonical(const FeistelParams& p, const TripleDB& d);
// Injective database over [2^{2n}] of the pairs joined by chains.
Database supported(const FeistelParams& p, const TripleDB& d);
// The triple with the chain starting at u removed; throws if u is unsupported.
TripleDB remove_chain(const FeistelParams& p, const TripleDB& d, Index u);

struct AllowabilityReport {
  bool input_left_collision = false;
  bool output_left_collision = false;
  bool internal_left_collision = false;
  bool allowable() const { return !input_left_collision && !output_left_collision && !internal_left_collision; }
};

AllowabilityReport allowability(const FeistelParams& p, const Database& i);
bool is_allowable(const FeistelParams& p, const Database& i);

// One run of the extension algorithm over the pairs of `i` in increasing
// input order, using z_j = zs[j]. Throws on a non-allowable `i` or on a z
// whose middle value is already in Dom(D_k).
TripleDB extend_database(const FeistelParams& p, const Database& i, const std::vector<Index>& zs);
// Every canonical triple produced by some run: the set D(i).
std::vector<TripleDB> extend_database_all(const FeistelParams& p, const Database& i);

struct AllowedValues {
  std::vector<Index> values;  // V: all v with A[u -> v] allowable
  std::vector<Index> lefts;   // L: left halves of V
};

// Throws if u is in Dom(a) or a does not allow u. Also throws
// std::logic_error if |L| < 2^n - 2t^2 - 2t or L is not closed under
// arbitrary right halves.
AllowedValues allowed_values(const FeistelParams& p, const Database& a, Index u);
bool allows(const FeistelParams& p, const Database& a, Index u);

using TripleSet = std::set<TripleDB>;

// Extension families of a canonical triple.
TripleSet one_extensions(const FeistelParams& p, const TripleDB& d);
TripleSet two_extensions(const FeistelParams& p, const TripleDB& d);
TripleSet three_extensions(const FeistelParams& p, const TripleDB& d);

// Up-pipes for u outside Dom(d) and allowed by Supp(d).
TripleSet up_pipe_h(const FeistelParams& p, const TripleDB& d, Index u);
TripleSet up_pipe_hk(const FeistelParams& p, const TripleDB& d, Index u);
TripleSet up_pipe_hkf(const FeistelParams& p, const TripleDB& d, Index u);
// Down-pipes for u in Dom(d).
TripleSet down_pipe_h(const FeistelParams& p, const TripleDB& d, Index u);
TripleSet down_pipe_k(const FeistelParams& p, const TripleDB& d, Index u);
TripleSet down_pipe_f(const FeistelParams& p, const TripleDB& d, Index u);
// D[u -> v]: three-extensions of d with a chain from u to v.
TripleSet assignment_set(const FeistelParams& p, const TripleDB& d, Index u, Index v);

// Injective databases over [2^{2n}] of size exactly t, ordered by domain
// subset, then values (both lexicographic).
std::vector<Database> injective_databases(const FeistelParams& p, Index t);
std::vector<Database> allowable_databases(const FeistelParams& p, Index t);

// Every canonical triple supporting a database of size exactly t, found by
// running the extension algorithm on every allowable injective database.
std::vector<TripleDB> canonical_triples(const FeistelParams& p, Index t);

struct CensusRow {
  unsigned n = 0;
  Index t = 0;
  std::size_t triples = 0;
  // Per-triple counts; `uniform` is false if triples disagree.
  Index chains = 0, semi2 = 0, semi1 = 0, semi0 = 0;
  bool uniform = true;
  bool leftward_matches = true;  // leftward counts equal the rightward ones
};

CensusRow chain_census(const FeistelParams& p, Index t);
std::string census_csv(const std::vector<CensusRow>& rows);  // n,t,chains,semi2,semi1,semi0

// Triple register layout {H, K, F}, each holding a raw round database.
struct TripleRegisters {
  std::string h = "H", k = "K", f = "F";
};

RegisterLayout triple_layout(const FeistelParams& p, const TripleRegisters& regs = {});
Index encode_triple(const FeistelParams& p, const RegisterLayout& layout, const TripleDB& d, Index base = 0,
                    const TripleRegisters& regs = {});
TripleDB decode_triple(const FeistelParams& p, const RegisterLayout& layout, Index index,
                       const TripleRegisters& regs = {});

// Uniform superposition over D(a) on a triple layout.
SparseState canonical_superposition(const FeistelParams& p, const RegisterLayout& layout, const Database& a,
                                    const TripleRegisters& regs = {});

// The three per-register compression pieces for one input u (2n bits).
struct CompressionOps {
  LinearOp h, k, f;
  // Product h * k * f, the compression U_u or G_u.
  LinearOp compression() const;
  // f * k * h, the decompression order (first H, then K, then F).
  LinearOp decompression() const;
};

// U^(H), U^(K), U^(F) on input u. With `ureg` non-empty, u is read from that
// register instead of the argument.
CompressionOps standard_compression_ops(const FeistelParams& p, const RegisterLayout& layout, Index u,
                                        Index t_max, const TripleRegisters& regs = {},
                                        const std::string& ureg = "");
// Input u as a function of the basis index; kNoInput makes every piece act
// as the identity on that column.
using InputSelector = std::function<Index(Index)>;
CompressionOps standard_compression_ops(const FeistelParams& p, const RegisterLayout& layout, InputSelector u_of,
                                        Index t_max, const TripleRegisters& regs = {});

// G^(H), G^(K), G^(F) = U^(F) on input u.
CompressionOps canonical_compression_ops(const FeistelParams& p, const RegisterLayout& layout, Index u,
                                         Index t_max, const TripleRegisters& regs = {},
                                         const std::string& ureg = "");
CompressionOps canonical_compression_ops(const FeistelParams& p, const RegisterLayout& layout, InputSelector u_of,
                                         Index t_max, const TripleRegisters& regs = {});

// Basis indices of triples whose components all have size <= t.
std::vector<Index> triple_columns(const FeistelParams& p, const RegisterLayout& layout, Index t,
                                  const TripleRegisters& regs = {});

}  // namespace qperm
