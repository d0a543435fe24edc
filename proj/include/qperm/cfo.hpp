// cfo.hpp
// Compressed function oracle: compression swaps, the purified query, the
// compressed oracle CF, standard and compressed experiments, the
// fundamental-lemma check, validity projectors and restricted compression.

#pragma once

#include "qperm/adversary.hpp"
#include "qperm/databases.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace qperm {

struct FunctionOracleConfig {
  Index M = 4;
  Index N = 4;
  Index t_max = 4;  // largest database an operator may produce

  void validate() const;  // throws unless N is a power of two and t_max <= M
  DbCodec codec() const { return DbCodec(M, N); }
};

// Allowed completion values S(D0, x) for a base database D0 (raw) with x undefined.
using CompletionSet = std::function<std::vector<Index>(const DbCodec& codec, Index d0_raw, Index x)>;

CompletionSet all_values();          // S = [N]
CompletionSet values_outside_image();  // S = [N] \ Im(D0)

// Hermitian involution on the database register `dreg`: within each block
// {D0} u {D0[x->y]} it swaps |D0> with the uniform superposition over
// y in S(D0, x) and acts as the identity on the orthogonal complement.
// The input point is x_of(full basis index). Throws std::length_error if an
// output database would exceed t_max, std::invalid_argument if S is empty.
LinearOp swap_compression(const RegisterLayout& layout, const std::string& dreg, const DbCodec& codec,
                          std::function<Index(Index)> x_of, CompletionSet completions, Index t_max);

// Returned by an input selector when a column has no input point.
inline constexpr Index kNoInput = ~Index{0};
// Completion set computed from the full basis index, whose database digit at
// x has already been reset to bottom.
using IndexedCompletionSet = std::function<std::vector<Index>(Index base_index, Index x)>;

// Same swap with sets that may depend on other registers. x_of may return
// kNoInput, and an empty set acts as the identity on its block. The
// selector and the set must not depend on the database digit at x.
LinearOp swap_compression_indexed(const RegisterLayout& layout, const std::string& dreg, const DbCodec& codec,
                                  std::function<Index(Index)> x_of, IndexedCompletionSet completions, Index t_max);

// fc_x for a fixed input x, acting on register `dreg` of `layout`.
LinearOp build_fc(const FunctionOracleConfig& cfg, const RegisterLayout& layout, Index x,
                  const std::string& dreg = "D");
// fc controlled on the input register: |x>|D> -> |x> fc_x |D>.
LinearOp build_fc_controlled(const FunctionOracleConfig& cfg, const RegisterLayout& layout,
                             const std::string& xreg = "X", const std::string& dreg = "D");
// P|x, y>|D> = |x, y xor D(x)>|D>, identity where D(x) is undefined.
LinearOp build_purified_query(const RegisterLayout& layout, const DbCodec& codec, const std::string& xreg = "X",
                              const std::string& yreg = "Y", const std::string& dreg = "D");
// CF = fc P fc (fc is Hermitian).
LinearOp build_cf(const FunctionOracleConfig& cfg, const RegisterLayout& layout);
// Gamma_x: projector onto databases with x in the domain.
LinearOp decompressed_projector(const FunctionOracleConfig& cfg, const RegisterLayout& layout, Index x,
                                const std::string& dreg = "D");
// Xi = prod_x fc_x Gamma_x fc_x.
LinearOp validity_projector(const FunctionOracleConfig& cfg, const RegisterLayout& layout,
                            const std::string& dreg = "D");

// Adversary registers followed by the database register "D".
RegisterLayout compressed_layout(const RegisterLayout& adversary, const DbCodec& codec);
// |initial>_A |bottom>_D.
SparseState compressed_initial_state(const AdversaryCircuit& adv, const DbCodec& codec);
// Norm of the component on databases larger than q.
double amplitude_outside(const SparseState& state, const DbCodec& codec, Index q, const std::string& dreg = "D");

// Oracle O_f on the adversary layout: y xor f(x).
LinearOp function_oracle(const RegisterLayout& layout, const std::vector<Index>& f);

struct StandardView {
  DensityMatrix rho;
  bool exact = true;
  std::size_t samples = 0;
  double std_error = 0.0;  // largest entrywise standard error (Monte Carlo only)
};

inline constexpr std::size_t kExactFunctionLimit = 65536;

// E_f rho(A_q O_f ... A_0|0>). Exact over all N^M functions when that count
// is at most `exact_limit`, otherwise Monte Carlo over `samples` functions.
StandardView run_standard_experiment(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv,
                                     std::uint64_t seed = 0, std::size_t samples = 4096,
                                     std::size_t exact_limit = kExactFunctionLimit);

struct CompressedRun {
  SparseState state;
  DensityMatrix view;  // Tr_D of the final state
};
CompressedRun run_compressed_experiment(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv,
                                        bool with_view = true);

struct LemmaCheck {
  double lhs = 0;           // decompressed checks
  double compressed = 0;    // database checks
  double rhs = 0;           // compressed + slack
  bool holds(double tol = 1e-9) const { return lhs <= rhs + tol; }
};

// ||Pi^(O_f) psi|| <= ||Pi^(CF) psi|| + sqrt(l/N) for the compressed final
// state psi; the output tuple sits in registers ox1, oy1, ..., oxl, oyl.
LemmaCheck fundamental_lemma_check(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv, std::size_t l);
// Same, on a given compressed final state.
LemmaCheck fundamental_lemma_on_state(const FunctionOracleConfig& cfg, const SparseState& psi, std::size_t l);

// Runs the compressed experiment and checks ||Xi psi - psi|| <= tol after
// every query.
bool check_validity_preserved(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv, double tol = 1e-10);

// G_x for a fixed x with completion sets S_{x,D}.
LinearOp restricted_compression(const FunctionOracleConfig& cfg, const RegisterLayout& layout, Index x,
                                CompletionSet sets, const std::string& dreg = "D");
// ||fc_x - G_x|| restricted to databases of size <= t (exact).
double compression_distance(const FunctionOracleConfig& cfg, Index x, const CompletionSet& sets, Index t);

nlohmann::json lemma_record(const FunctionOracleConfig& cfg, std::uint64_t seed, const LemmaCheck& check,
                            double trace_distance);

}  // namespace qperm
