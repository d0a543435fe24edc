// cpo.hpp
// Compressed permutation oracle: pC, the flip F, cP with a direction bit,
// standard and compressed experiments and the fundamental-lemma check.

#pragma once

#include "qperm/cfo.hpp"

namespace qperm {

struct PermOracleConfig {
  Index N = 4;
  Index t_max = 4;  // largest database an operator may produce

  void validate() const;  // throws unless N is a power of two and t_max <= N
  DbCodec codec() const { return DbCodec(N, N); }
};

// pC controlled on the input register: swaps |I> (x undefined) with the
// uniform superposition over I[x->y], y outside Im(I).
LinearOp build_pc(const PermOracleConfig& cfg, const RegisterLayout& layout, const std::string& xreg = "X",
                  const std::string& dreg = "D");
// pC_x for a fixed input x.
LinearOp build_pc_at(const PermOracleConfig& cfg, const RegisterLayout& layout, Index x, const std::string& dreg = "D");
// F|I> = |I^{-1}>.
LinearOp build_flip(const PermOracleConfig& cfg, const RegisterLayout& layout, const std::string& dreg = "D");
// cP|b> = |b> (pC P pC) for b = 0 and |b> (F pC P pC F) for b = 1, on
// registers B, X, Y, D.
LinearOp build_cp(const PermOracleConfig& cfg, const RegisterLayout& layout);
// Same structure with given compressions C_f, C_b (on the whole layout):
// C_f P C_f^dagger for b = 0 and F C_b P C_b^dagger F for b = 1.
LinearOp build_cp_from(const PermOracleConfig& cfg, const RegisterLayout& layout, const LinearOp& forward_pc,
                       const LinearOp& inverse_pc);

// O_phi|b, x, y> = |b, x, y xor phi^{1-2b}(x)> on the adversary layout.
LinearOp permutation_oracle(const RegisterLayout& layout, const Permutation& phi);

inline constexpr Index kExactPermutationMaxN = 6;

// E_phi rho(A_q O_phi ... A_0|0>), exact over all N! permutations. With
// `keep` non-empty the view is reduced to those adversary registers.
StandardView run_perm_standard_experiment(const PermOracleConfig& cfg, const AdversaryCircuit& adv,
                                          Index max_n = kExactPermutationMaxN,
                                          const std::vector<std::string>& keep = {});
CompressedRun run_cp_experiment(const PermOracleConfig& cfg, const AdversaryCircuit& adv, bool with_view = true);

// ||Pi^(O_phi) psi|| <= ||Pi^(cP) psi|| + l / sqrt(N - t - l), with tuples
// restricted to distinct inputs x_1, ..., x_l.
LemmaCheck perm_fundamental_lemma_on_state(const PermOracleConfig& cfg, const SparseState& psi, std::size_t l,
                                           Index t);
LemmaCheck perm_fundamental_lemma_check(const PermOracleConfig& cfg, const AdversaryCircuit& adv, std::size_t l);

nlohmann::json perm_record(const PermOracleConfig& cfg, std::size_t q, std::uint64_t seed, double trace_distance,
                           const LemmaCheck& check);

}  // namespace qperm
