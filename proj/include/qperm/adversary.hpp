// adversary.hpp
// Query algorithms given as explicit unitaries on small register sets, and
// generators used by the oracle experiments.

#pragma once

#include "qperm/qlinalg.hpp"
#include "qperm/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qperm {

// A dense unitary acting on the named registers (identity elsewhere).
struct Gate {
  std::vector<std::string> targets;
  Matrix matrix;
};

// A_0, ..., A_q. Each step is a product of gates applied in list order.
// Query registers are "X" and "Y" (plus the direction bit "B" for
// permutations). For the fundamental-lemma checks the last 2l registers of
// the layout hold (x_1, y_1, ..., x_l, y_l).
struct AdversaryCircuit {
  RegisterLayout layout;
  Index initial = 0;
  std::vector<std::vector<Gate>> steps;

  std::size_t queries() const { return steps.empty() ? 0 : steps.size() - 1; }
};

// Throws unless every gate is unitary within 1e-10 and targets exist.
void validate(const AdversaryCircuit& adv);

// Applies step `k` to a state whose layout contains the adversary registers.
SparseState apply_step(const AdversaryCircuit& adv, std::size_t k, const SparseState& state);

// A_q O ... A_1 O A_0 applied to `initial` (a state on a layout holding
// the adversary registers plus anything the oracle needs).
SparseState run_queries(const AdversaryCircuit& adv, const SparseState& initial, const LinearOp& oracle);

// Output tuple (x_1, y_1, ..., x_l, y_l) register names of the layout.
std::vector<std::string> output_registers(const AdversaryCircuit& adv, std::size_t l);

Matrix random_gaussian_matrix(Index d, Philox& rng);
// Haar-like unitary: QR of a complex Gaussian matrix with phase-fixed R.
Matrix random_unitary(Index d, Philox& rng);

// Basis permutation matrix on the registers `cards`: index -> f(index).
Matrix permutation_matrix(Index dim, const std::function<Index(Index)>& f);
// |a, b> -> |a, b xor a> for two registers of equal power-of-two size.
Gate xor_copy_gate(const RegisterLayout& layout, const std::string& from, const std::string& to);
// |a> -> |a xor v> on one register.
Gate xor_constant_gate(const RegisterLayout& layout, const std::string& reg, Index v);
// Walsh-Hadamard transform on a power-of-two register.
Gate hadamard_gate(const RegisterLayout& layout, const std::string& reg);
Gate random_gate(const RegisterLayout& layout, const std::vector<std::string>& targets, Philox& rng);

// Layout builders.
RegisterLayout function_adversary_layout(Index M, Index N, Index workspace, std::size_t l);
RegisterLayout permutation_adversary_layout(Index N, Index workspace, std::size_t l);

// q queries with independent random unitaries on the query and workspace
// registers before each query; the final step copies (X, Y) into the first
// output pair when l >= 1 and writes fixed random guesses into the rest.
AdversaryCircuit random_adversary(const RegisterLayout& layout, std::size_t q, std::uint64_t seed, std::size_t l = 0);
// Classical queries at fixed inputs xs[i] (direction bits bs[i] if the
// layout has "B"); the Y register is cleared between queries by copying
// the answer into the workspace-free output pairs when available.
AdversaryCircuit classical_adversary(const RegisterLayout& layout, const std::vector<Index>& xs,
                                     const std::vector<Index>& bs = {}, std::size_t l = 0);
// Queries on a uniform superposition of inputs (Hadamard on X before each query).
AdversaryCircuit hadamard_adversary(const RegisterLayout& layout, std::size_t q, std::uint64_t seed);
// Ignores the oracle and outputs a fixed guess list.
AdversaryCircuit guessing_adversary(const RegisterLayout& layout, std::size_t q,
                                    const std::vector<std::pair<Index, Index>>& guesses);

}  // namespace qperm
