// mforacle.hpp
// Purified masked-Feistel oracle: twirl distributions, mfP, mfC, mfF, cmfO,
// sophisticated states, the intertwiner into H(I) + H(P), subspace
// projectors, ideal operators, cromulence estimates, the shifted Feistel
// sampler and the soundness experiment.
//
// Full purification spaces exist only at n = 1. The direct sum H(I) + H(P)
// is a tagged register: Tag = 0 holds a purification (Pi, Omega, H, K, F,
// with D empty), Tag = 1 holds an injective database in D (Pi = Omega = 0,
// H, K, F empty).

#pragma once

#include "qperm/cpo.hpp"
#include "qperm/feistel_core.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace qperm {

struct TwirlPair {
  Permutation pi, omega;
  bool operator==(const TwirlPair& o) const { return pi == o.pi && omega == o.omega; }
  bool operator<(const TwirlPair& o) const;
};

enum class TwirlKind { Uniform, Feistel2Pair, Custom };

class TwirlDistribution {
 public:
  using Weighted = std::vector<std::pair<TwirlPair, double>>;

  static TwirlDistribution uniform(const FeistelParams& p);
  // pi ~ Feist^(2), omega ~ (Feist^(2))^{-1}.
  static TwirlDistribution feistel2_pair(const FeistelParams& p);
  // Throws on negative weights or a total off 1 by more than 1e-9.
  static TwirlDistribution custom(const FeistelParams& p, Weighted weights);

  TwirlKind kind() const { return kind_; }
  const FeistelParams& params() const { return p_; }
  std::string name() const;  // uniform | feistel2-pair | custom
  // Exact weights available (n = 1 or custom).
  bool enumerable() const { return kind_ == TwirlKind::Custom || p_.n == 1; }
  // Support with positive weights, sorted by (pi, omega). Throws unless enumerable.
  const Weighted& support() const;
  double weight(const Permutation& pi, const Permutation& omega) const;
  TwirlPair sample(Philox& rng) const;
  // Image under (pi, omega) -> (omega^{-1}, pi^{-1}).
  TwirlDistribution flipped() const;

 private:
  TwirlKind kind_ = TwirlKind::Uniform;
  FeistelParams p_;
  std::shared_ptr<const Weighted> support_;
};

Permutation random_permutation(Index n, Philox& rng);
// Two-round Feistel (left-to-right, then right-to-left).
Permutation feistel2(const FeistelParams& p, const RoundFunction& g1, const RoundFunction& g2);

// pi * I * omega = {(pi(x), omega^{-1}(y)) : (x, y) in I}.
Database star_action(const Permutation& pi, const Database& i, const Permutation& omega);
// (pi, omega) in R_I.
bool resolves(const FeistelParams& p, const TwirlPair& t, const Database& i);
// (pi, omega) in R_{x,I}: resolves I and pi * I * omega allows pi(x).
bool resolves_at(const FeistelParams& p, const TwirlPair& t, const Database& i, Index x);
// D_I and D_{x,I} for enumerable distributions; throw if the set is empty.
TwirlDistribution condition_on_resolving(const TwirlDistribution& d, const Database& i);
TwirlDistribution condition_on_allowing(const TwirlDistribution& d, const Database& i, Index x);

class PurificationSpace {
 public:
  // Adversary registers (B, X, Y of size 4, anything else) followed by the
  // purification block. Throws std::length_error unless n = 1.
  PurificationSpace(const FeistelParams& p, const RegisterLayout& adversary, Index t_max = 2, bool tagged = false);

  const FeistelParams& params() const { return p_; }
  Index t_max() const { return t_max_; }
  bool tagged() const { return tagged_; }
  const RegisterLayout& adversary() const { return adversary_; }
  const RegisterLayout& block() const { return block_; }
  const RegisterLayout& layout() const { return layout_; }
  const std::vector<Permutation>& permutations() const { return perms_; }
  DbCodec injective_codec() const { return DbCodec(p_.size(), p_.size()); }

  // Index of |rest>|pi, omega, d> (Tag = 0), rest an adversary index.
  Index purification_index(const Permutation& pi, const Permutation& omega, const TripleDB& d, Index rest = 0) const;
  // Index of |rest>|I> (Tag = 1); requires a tagged space.
  Index database_index(const Database& i, Index rest = 0) const;
  // Local offsets inside the block.
  Index block_offset(Index full) const { return full % block_.dimension(); }
  Index rest_of(Index full) const { return full / block_.dimension(); }

  bool on_database_branch(Index full) const;
  TwirlPair twirl_at(Index full) const;
  TripleDB triple_at(Index full) const;

 private:
  FeistelParams p_;
  Index t_max_;
  bool tagged_;
  RegisterLayout adversary_, block_, layout_;
  std::vector<Permutation> perms_;
};

struct MfOperators {
  LinearOp mfP, mfC, mfC_dag, mfF, ctrl_mfF, cmfO;
};

// mfP answers y xor omega(Feist(pi(x))) from the databases (identity where
// a chain is missing); mfC = U^(H) U^(K) U^(F) at u = pi(x); mfF maps
// (pi, omega, h, k, f) to (omega^{-1}, pi^{-1}, f, k, h). All act as the
// identity on the database branch.
MfOperators build_mf_operators(const PurificationSpace& space);

// Basis of sophisticated states for every injective database I with R_I
// nonempty and |I| <= t_max (sizes capped by the space).
class SophisticatedBasis {
 public:
  SophisticatedBasis(const PurificationSpace& space, const TwirlDistribution& dist);

  const PurificationSpace& space() const { return space_; }
  const std::vector<Database>& databases() const { return dbs_; }
  // Position of I in databases(), or -1.
  int find(const Database& i) const;
  // |rest>|P(I)>; throws std::invalid_argument if R_I is empty.
  SparseState state(const Database& i, Index rest = 0) const;
  // Coefficients <rest, P(I)|psi> keyed by (rest, id).
  absl::flat_hash_map<std::pair<Index, int>, cplx> overlaps(const SparseState& psi) const;
  // Adds c |rest>|P(id)> to `out`.
  void add_state(SparseState& out, Index rest, int id, cplx c) const;

  // Complete families at x: I with x outside Dom(I), |I| < 2^n, such that
  // every I[x -> y] (y outside Im(I)) is in the basis.
  struct Family {
    int base;
    std::vector<int> completions;
  };
  const std::vector<Family>& families(Index x) const { return families_.at(x); }

 private:
  PurificationSpace space_;
  std::vector<Database> dbs_;
  std::vector<std::vector<std::pair<Index, double>>> entries_;
  absl::flat_hash_map<Index, std::pair<int, double>> lookup_;
  std::vector<std::vector<Family>> families_;
};

SparseState sophisticated_state(const PurificationSpace& space, const TwirlDistribution& dist, const Database& i,
                                Index rest = 0);

// 1 + sum_I (|I><P(I)| - |P(I)><P(I)|) from the purification branch into
// the tagged space (zero on database-branch input); requires a tagged space.
LinearOp build_intertwiner(const SophisticatedBasis& basis);

struct SubspaceProjectors {
  LinearOp soph, val, qval, indb, ele, fele, heart;
};

// Projectors onto subspaces of the purification branch (they annihilate
// the database branch). ele uses complete families only.
SubspaceProjectors build_subspace_projectors(const SophisticatedBasis& basis);

struct IdealOperators {
  LinearOp mfC_bar;    // Hermitian
  LinearOp cmfO_bar;
  LinearOp mfC_tilde;  // sanitized compression G_{pi(x)}
};
IdealOperators build_ideal_operators(const SophisticatedBasis& basis);

// Operators on the database branch of a tagged space (identity on Tag = 0).
struct BranchOperators {
  LinearOp pC, P, F, cP;
};
BranchOperators build_branch_operators(const PurificationSpace& space);

// Norm of `op` on the span of the given states (orthonormalized first).
double operator_norm_on_span(const LinearOp& op, const std::vector<SparseState>& states);

// Estimates with Wilson score intervals (95%); exact values have lo = hi.
struct Estimate {
  double value = 0, lo = 0, hi = 0;
  std::size_t trials = 0;
  bool exact = false;
};
Estimate wilson_estimate(std::size_t successes, std::size_t trials, double z = 1.96);

struct CromulenceOptions {
  // kNoInput picks the smallest (and next smallest) y outside Im(I).
  Index y = kNoInput, y2 = kNoInput;
  Index l = 0;
  double acceptance_floor = 1e-4;
};

struct CromulenceReport {
  Estimate resolve;       // Pr_{D_I}[R_{x,I}]
  Estimate left_marginal;  // Pr_{D_{x,I}}[omega^{-1}(y)_L = l]
  Estimate joint;         // Pr_{D_{x,I}}[omega^{-1}(y)_L = omega^{-1}(y')_L = l]
  double ratio_deviation = 0;  // worst relative deviation over observed pairs
  std::size_t ratio_pairs = 0;
  Index y = 0, y2 = 0, l = 0;
  nlohmann::json to_json() const;
};

inline constexpr std::size_t kExactSupportLimit = 1'000'000;

// Exact enumeration for enumerable distributions with support <= 10^6,
// otherwise `budget` samples from D. Throws std::runtime_error if the
// acceptance rate of R_I falls below the floor.
CromulenceReport estimate_cromulence(const TwirlDistribution& dist, const Database& i, Index x, std::size_t budget,
                                     std::uint64_t seed, const CromulenceOptions& opts = {});

// Round databases of the two Feistel permutations: pi = Feist(d1, d2) and
// omega^{-1} = Feist(w1, w2), first round left-to-right.
struct Feistel2Databases {
  Database pi1, pi2, om1, om2;
};

// Five-step shifted procedure for D_I under the feistel2-pair twirl.
// Throws std::runtime_error if step 1 never yields an allowable A.
TwirlPair shifted_sampler(const FeistelParams& p, const Database& i, Philox& rng, std::size_t max_attempts = 100000);
// Rejection sampling of D_I by direct draws from the distribution.
TwirlPair rejection_sampler(const TwirlDistribution& dist, const Database& i, Philox& rng,
                            std::size_t max_attempts = 100000);
// Shift transformations on partial round databases.
Feistel2Databases right_shift_pi(const Feistel2Databases& d, Index s);
Feistel2Databases right_shift_omega(const Feistel2Databases& d, Index s);
Feistel2Databases left_shift(const Feistel2Databases& d, Index s);
// Total round databases to (pi, omega).
TwirlPair twirl_from_rounds(const FeistelParams& p, const Feistel2Databases& d);

struct ExperimentReport {
  std::string experiment;
  unsigned n = 1;
  std::size_t q = 0;
  std::string dist;
  std::uint64_t seed = 0;
  nlohmann::json values = nlohmann::json::object();
  nlohmann::json ci = nlohmann::json::object();
  double runtime_ms = 0;
  nlohmann::json to_json() const;
};

inline constexpr std::size_t kSoundnessStateCap = 20'000'000;

// At n = 1 with q <= 3, exactly: masked-Feistel view vs cP, Feist^(7) vs a
// uniform permutation, the cmfO view vs the masked-Feistel view, and the
// per-query hybrid deviations ||(I cmfO - cP I) phi_t||.
ExperimentReport run_soundness_experiment(const TwirlDistribution& dist, const AdversaryCircuit& adv,
                                          std::uint64_t seed = 0);

// Distribution of Feist^(r) over S_4 at n = 1 (multiplicities over all
// round-function tuples), keyed by permutation rank.
std::vector<double> feistel_distribution(const FeistelParams& p, unsigned rounds);

}  // namespace qperm
