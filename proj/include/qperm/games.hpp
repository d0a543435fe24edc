// games.hpp
// Predicate search against real and compressed permutation oracles: search
// predicates and their database projector, sparsity, the two games and the
// search bound, cycle-free and sparsity-restricted compressions, the sponge
// construction and its chain predicates, and small Feistel distinguishers.

#pragma once

#include "qperm/cpo.hpp"
#include "qperm/feistel_core.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qperm {

using PairList = std::vector<std::pair<Index, Index>>;

// A set R of finite lists of input-output pairs. Search hints: lists have
// min_length..max_length entries; `ordered` false means decide is invariant
// under reordering; `repeats` allows a pair to occur more than once.
struct Predicate {
  std::string name;
  std::function<bool(const PairList&)> decide;
  std::size_t min_length = 1;
  std::optional<std::size_t> max_length;
  bool ordered = true;
  bool repeats = false;
};

inline constexpr std::size_t kSublistSearchCap = 1'000'000;

// I cap R != empty: some list of pairs of I (within the hints) lies in R.
// Without max_length, repetition-free lists up to |I| are searched.
// Throws std::length_error when the search would exceed kSublistSearchCap.
bool satisfies(const Predicate& r, const Database& i);

namespace predicates {
Predicate empty();
Predicate single_pair();  // every [(x, y)]
// k pairs with distinct inputs.
Predicate one_more(std::size_t k);
// [(x_1, x_2), (x_2, x_3), ..., (x_l, x_1)] with distinct x_i, x_1 minimal,
// 1 <= l <= N; fixed points count as cycles.
Predicate cycle(Index N);
Predicate dm_zero_preimage();  // [(x, x)]
// [(x, y), (x', y')] with x xor y = x' xor y', x != x', y != y'.
Predicate dm_collision();
// [(x || 0^n, y || 0^n)] over 2n-bit strings.
Predicate dszs(unsigned n);
Predicate union_of(const Predicate& a, const Predicate& b);
}  // namespace predicates

// Diagonal projector onto databases that satisfy R, on register `dreg`.
LinearOp predicate_projector(const RegisterLayout& layout, const DbCodec& codec, const Predicate& r,
                             const std::string& dreg = "D");
// Same on the single-register layout of an injective space.
LinearOp predicate_projector(const DatabaseSpace& space, const Predicate& r);

struct SparsityReport {
  Index t = 0;
  std::size_t s_t = 0;
  // Witness: base database, whether the count is over outputs (forward) or
  // inputs, the fixed point and the size of the offending set.
  Database witness;
  bool forward = true;
  Index point = 0;
  std::size_t count = 0;
  nlohmann::json to_json() const;
};

// Exact t-sparsity over all unsatisfied injective databases of size <= t.
SparsityReport brute_sparsity(const Predicate& r, Index N, Index t, std::size_t cap = kDefaultSpaceCap);

struct GameOptions {
  Index exact_max_n = kExactPermutationMaxN;
  bool monte_carlo = false;  // sample permutations when N exceeds exact_max_n
  std::size_t samples = 4096;
  std::uint64_t seed = 0;
};

struct GameResult {
  double value = 0;
  double std_error = 0;
  bool exact = true;
  std::size_t samples = 0;
};

// Pr[phi(x_i) = y_i for all i and [(x_i, y_i)] in R], with the output list
// read from registers ox1, oy1, ..., oxl, oyl. Throws std::length_error if
// N exceeds exact_max_n without monte_carlo.
GameResult play_real_game(const Predicate& r, const AdversaryCircuit& adv, Index N, std::size_t l,
                          const GameOptions& opts = {});
// ||Pi_R psi||^2 for the final cP state psi.
double play_compressed_game(const Predicate& r, const AdversaryCircuit& adv, Index N);

struct SearchBound {
  std::string predicate;
  Index N = 0;
  std::size_t q = 0, l = 0;
  std::uint64_t seed = 0;
  double p1 = 0, p2 = 0;
  double slack = 0;  // l / sqrt(N - q - l)
  double adv = 0;    // trace distance of the output-register views (real vs cP)
  double bound_rhs = 0;  // sqrt(p2) + slack + adv
  bool holds(double tol = 1e-8) const;
  std::string csv_row() const;
};
std::string search_bound_csv_header();

// sqrt(p1) <= sqrt(p2) + l / sqrt(N - q - l) + adv. Throws
// std::invalid_argument if N - q - l <= 0.
SearchBound search_bound_check(const Predicate& r, const AdversaryCircuit& adv, Index N, std::size_t l,
                               std::uint64_t seed = 0, const GameOptions& opts = {});

// Compression variants (Hermitian swaps on the database register, input
// point read from X). Cycle-free: completions avoid Dom(I), Im(I) and x.
LinearOp cycle_free_compression(const PermOracleConfig& cfg, const RegisterLayout& layout, const std::string& xreg = "X",
                                const std::string& dreg = "D");
// Forward sparsity-restricted: completions avoid Im(I) and every y with
// I[x -> y] satisfying R (no exclusion when I already satisfies R).
LinearOp sparsity_compression_forward(const PermOracleConfig& cfg, const RegisterLayout& layout, const Predicate& r,
                                      const std::string& xreg = "X", const std::string& dreg = "D");
// Backward variant, acting on the flipped database J = I^{-1} at point y:
// completions avoid Im(J) and every x with (J[y -> x])^{-1} satisfying R.
LinearOp sparsity_compression_backward(const PermOracleConfig& cfg, const RegisterLayout& layout, const Predicate& r,
                                       const std::string& xreg = "X", const std::string& dreg = "D");
// |0><0|_B (C_f P C_f) + |1><1|_B (F C_b P C_b F) on B, X, Y, D.
LinearOp modified_cp(const PermOracleConfig& cfg, const RegisterLayout& layout, const LinearOp& forward_compression,
                     const LinearOp& backward_compression);

// Frobenius norm of [a, b] on the given columns (an upper bound on the
// restricted operator norm; zero exactly when the restriction vanishes).
double commutator_norm(const LinearOp& a, const LinearOp& b, const std::vector<Index>& columns);

enum class CompressionVariant { CycleFree, SparsityForward, SparsityBackward };

// max_x ||pC_x - C_x|| restricted to databases of size <= t, on a bare
// database register. Backward variants are compared with F pC F.
double compression_closeness(const PermOracleConfig& cfg, CompressionVariant variant, Index t,
                             const Predicate& r = predicates::empty());

// All |b, x, y, I> columns with |I| <= t on layout (B, X, Y, D).
std::vector<Index> query_columns(const PermOracleConfig& cfg, const RegisterLayout& layout, Index t);

struct SpongeParams {
  unsigned r = 1, c = 1;  // rate and capacity bits
  Index width() const { return Index{1} << (r + c); }
  Index rate_of(Index u) const { return u >> c; }
  Index capacity_of(Index u) const { return u & ((Index{1} << c) - 1); }
  Index block(Index m) const { return m << c; }  // m || 0^c
  void validate() const;  // r, c >= 1 and r + c <= 16
};

// u_0 = 0, u_i = phi(u_{i-1} xor (m_i || 0^c)); returns the rate of u_l.
// Throws std::invalid_argument on an empty message or out-of-range blocks.
Index sponge_eval(const SpongeParams& s, const Permutation& phi, const std::vector<Index>& message);
// The chain [(x_i, phi(x_i))] traversed when hashing `message`.
PairList sponge_chain(const SpongeParams& s, const Permutation& phi, const std::vector<Index>& message);
// m_1 = x_1[0:r], m_{i+1} = x_{i+1}[0:r] xor y_i[0:r]; throws unless the list
// is a chain (x_1 capacity zero, capacities linked).
std::vector<Index> sponge_message(const SpongeParams& s, const PairList& chain);

inline constexpr std::size_t kSpongeMaxBlocks = 3;

struct SpongePredicates {
  Predicate preimage;           // R^{w-pre}
  Predicate internal_preimage;  // R^{z-ipre}
  Predicate internal_collision; // R^{icol}
  Predicate collision;          // R^{col}
};
// Chains have at most max_blocks pairs; products of two chains require the
// two chains to differ.
SpongePredicates sponge_predicates(const SpongeParams& s, Index w, Index z, std::size_t max_blocks = kSpongeMaxBlocks);
Predicate sponge_preimage(const SpongeParams& s, Index w, std::size_t max_blocks = kSpongeMaxBlocks);
Predicate sponge_internal_preimage(const SpongeParams& s, Index z, std::size_t max_blocks = kSpongeMaxBlocks);
Predicate sponge_internal_collision(const SpongeParams& s, std::size_t max_blocks = kSpongeMaxBlocks);
Predicate sponge_collision(const SpongeParams& s, std::size_t max_blocks = kSpongeMaxBlocks);

struct DistinguisherReport {
  std::string attack;
  unsigned n = 1, rounds = 3;
  std::size_t q = 0;
  bool exact = true;
  double accept_feistel = 0, accept_uniform = 0;
  double advantage = 0;
  double advantage_lo = 0, advantage_hi = 0;  // 95% interval (equal to advantage when exact)
  std::size_t samples = 0;
  // Trace distance of the adversary views (n = 1 only, otherwise NaN).
  double view_trace_distance = 0;
  // Total variation between Feist^(rounds) and a uniform permutation; bounds
  // every distinguisher (n = 1 only, otherwise NaN).
  double permutation_tv = 0;
  nlohmann::json to_json() const;
};

inline constexpr std::size_t kDistinguisherBudgetCap = 50'000'000;

// Builtin attacks: "xor-statistic" (two classical forward queries at
// (0, 0) and (1, 0) sharing x_R, accepting when y_R xor y'_R = x_L xor x'_L;
// q is 2) and "superposition" (q queries on a uniform superposition, scored
// by the optimal measurement, i.e. the view trace distance). n = 1 is exact;
// n = 2 samples `budget` round-function tuples. Throws std::length_error for
// n > 2 or a budget above the cap.
DistinguisherReport distinguisher_suite(unsigned n, unsigned rounds, const std::string& attack, std::size_t q,
                                        std::uint64_t seed = 0, std::size_t budget = 100000);
// Arbitrary adversary on the permutation layout, n = 1: view trace distance.
DistinguisherReport distinguisher_suite(unsigned rounds, const AdversaryCircuit& adv);
std::vector<std::string> builtin_attacks();

}  // namespace qperm
