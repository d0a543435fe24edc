// adversary.cpp

#include "qperm/adversary.hpp"

#include <Eigen/QR>

#include <bit>
#include <cmath>
#include <stdexcept>

namespace qperm {

namespace {

bool is_power_of_two(Index v) { return v != 0 && (v & (v - 1)) == 0; }

std::vector<std::string> query_registers(const RegisterLayout& layout) {
  std::vector<std::string> regs;
  for (const char* r : {"B", "X", "Y", "W"})
    if (layout.has(r)) regs.emplace_back(r);
  return regs;
}

std::size_t output_pair_count(const RegisterLayout& layout) {
  std::size_t l = 0;
  while (layout.has("ox" + std::to_string(l + 1))) ++l;
  return l;
}

}  // namespace

void validate(const AdversaryCircuit& adv) {
  if (adv.steps.empty()) throw std::invalid_argument("adversary needs at least the step A_0");
  if (adv.initial >= adv.layout.dimension()) throw std::invalid_argument("initial state outside the adversary layout");
  for (const auto& step : adv.steps)
    for (const auto& g : step) {
      Index d = 1;
      for (const auto& t : g.targets) d *= adv.layout.cardinality(t);
      if (static_cast<Index>(g.matrix.rows()) != d || static_cast<Index>(g.matrix.cols()) != d)
        throw std::invalid_argument("gate size does not match its target registers");
      Matrix id = Matrix::Identity(g.matrix.rows(), g.matrix.cols());
      if ((g.matrix.adjoint() * g.matrix - id).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("gate is not unitary");
    }
}

SparseState apply_step(const AdversaryCircuit& adv, std::size_t k, const SparseState& state) {
  SparseState s = state;
  for (const auto& g : adv.steps.at(k)) s = dense_on(g.matrix, g.targets, state.layout()).apply(s);
  return s;
}

SparseState run_queries(const AdversaryCircuit& adv, const SparseState& initial, const LinearOp& oracle) {
  SparseState s = apply_step(adv, 0, initial);
  for (std::size_t k = 1; k < adv.steps.size(); ++k) s = apply_step(adv, k, oracle.apply(s));
  return s;
}

std::vector<std::string> output_registers(const AdversaryCircuit& adv, std::size_t l) {
  const std::size_t r = adv.layout.size();
  if (2 * l > r) throw std::invalid_argument("adversary layout has too few registers for the output tuple");
  std::vector<std::string> out;
  for (std::size_t i = r - 2 * l; i < r; ++i) out.push_back(adv.layout.name(i));
  return out;
}

Matrix random_gaussian_matrix(Index d, Philox& rng) {
  Matrix g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = cplx(standard_normal(rng), standard_normal(rng));
  return g;
}

Matrix random_unitary(Index d, Philox& rng) {
  Matrix g = random_gaussian_matrix(d, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    cplx diag = r(i, i);
    double a = std::abs(diag);
    if (a > 0) q.col(i) *= diag / a;
  }
  return q;
}

Matrix permutation_matrix(Index dim, const std::function<Index(Index)>& f) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Index i = 0; i < dim; ++i) m(static_cast<Eigen::Index>(f(i)), static_cast<Eigen::Index>(i)) = 1.0;
  return m;
}

Gate xor_copy_gate(const RegisterLayout& layout, const std::string& from, const std::string& to) {
  Index a = layout.cardinality(from), b = layout.cardinality(to);
  if (a != b || !is_power_of_two(a)) throw std::invalid_argument("xor copy needs equal power-of-two registers");
  return {{from, to}, permutation_matrix(a * b, [a](Index i) {
            Index x = i / a, y = i % a;
            return x * a + (y ^ x);
          })};
}

Gate xor_constant_gate(const RegisterLayout& layout, const std::string& reg, Index v) {
  Index c = layout.cardinality(reg);
  if (!is_power_of_two(c) || v >= c) throw std::invalid_argument("xor constant out of range");
  return {{reg}, permutation_matrix(c, [v](Index i) { return i ^ v; })};
}

Gate hadamard_gate(const RegisterLayout& layout, const std::string& reg) {
  Index c = layout.cardinality(reg);
  if (!is_power_of_two(c)) throw std::invalid_argument("Hadamard needs a power-of-two register");
  Matrix h(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  const double s = 1.0 / std::sqrt(static_cast<double>(c));
  for (Index i = 0; i < c; ++i)
    for (Index j = 0; j < c; ++j)
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (std::popcount(i & j) % 2 ? -s : s);
  return {{reg}, h};
}

Gate random_gate(const RegisterLayout& layout, const std::vector<std::string>& targets, Philox& rng) {
  Index d = 1;
  for (const auto& t : targets) d *= layout.cardinality(t);
  return {targets, random_unitary(d, rng)};
}

RegisterLayout function_adversary_layout(Index M, Index N, Index workspace, std::size_t l) {
  std::vector<std::pair<std::string, Index>> regs{{"X", M}, {"Y", N}};
  if (workspace > 1) regs.emplace_back("W", workspace);
  for (std::size_t i = 1; i <= l; ++i) {
    regs.emplace_back("ox" + std::to_string(i), M);
    regs.emplace_back("oy" + std::to_string(i), N);
  }
  return RegisterLayout(std::move(regs));
}

RegisterLayout permutation_adversary_layout(Index N, Index workspace, std::size_t l) {
  std::vector<std::pair<std::string, Index>> regs{{"B", 2}, {"X", N}, {"Y", N}};
  if (workspace > 1) regs.emplace_back("W", workspace);
  for (std::size_t i = 1; i <= l; ++i) {
    regs.emplace_back("ox" + std::to_string(i), N);
    regs.emplace_back("oy" + std::to_string(i), N);
  }
  return RegisterLayout(std::move(regs));
}

AdversaryCircuit random_adversary(const RegisterLayout& layout, std::size_t q, std::uint64_t seed, std::size_t l) {
  Philox rng(seed);
  AdversaryCircuit adv{layout, 0, {}};
  const auto regs = query_registers(layout);
  for (std::size_t k = 0; k <= q; ++k) adv.steps.push_back({random_gate(layout, regs, rng)});
  if (l > output_pair_count(layout)) throw std::invalid_argument("layout has fewer output pairs than l");
  if (l >= 1) {
    adv.steps.back().push_back(xor_copy_gate(layout, "X", "ox1"));
    adv.steps.back().push_back(xor_copy_gate(layout, "Y", "oy1"));
  }
  for (std::size_t i = 2; i <= l; ++i) {
    auto ox = "ox" + std::to_string(i), oy = "oy" + std::to_string(i);
    adv.steps.back().push_back(xor_constant_gate(layout, ox, rng.below(layout.cardinality(ox))));
    adv.steps.back().push_back(xor_constant_gate(layout, oy, rng.below(layout.cardinality(oy))));
  }
  return adv;
}

AdversaryCircuit classical_adversary(const RegisterLayout& layout, const std::vector<Index>& xs,
                                     const std::vector<Index>& bs, std::size_t l) {
  AdversaryCircuit adv{layout, 0, {}};
  const std::size_t pairs = output_pair_count(layout);
  if (l > pairs) throw std::invalid_argument("layout has fewer output pairs than l");
  Index cur_x = 0, cur_b = 0;
  for (std::size_t k = 0; k <= xs.size(); ++k) {
    std::vector<Gate> step;
    if (k > 0 && k - 1 < pairs) {
      // Park the previous query and its answer in output pair k.
      auto ox = "ox" + std::to_string(k), oy = "oy" + std::to_string(k);
      Index nx = layout.cardinality("X"), ny = layout.cardinality("Y");
      if (nx != layout.cardinality(ox) || ny != layout.cardinality(oy))
        throw std::invalid_argument("output pair sizes do not match the query registers");
      step.push_back(xor_copy_gate(layout, "X", ox));
      step.push_back({{"Y", oy}, permutation_matrix(ny * ny, [ny](Index i) { return (i % ny) * ny + i / ny; })});
    }
    if (k < xs.size()) {
      if (cur_x != xs[k]) step.push_back(xor_constant_gate(layout, "X", cur_x ^ xs[k]));
      cur_x = xs[k];
      Index b = k < bs.size() ? bs[k] : 0;
      if (b != cur_b) step.push_back(xor_constant_gate(layout, "B", 1));
      cur_b = b;
    }
    adv.steps.push_back(std::move(step));
  }
  return adv;
}

AdversaryCircuit hadamard_adversary(const RegisterLayout& layout, std::size_t q, std::uint64_t seed) {
  Philox rng(seed);
  AdversaryCircuit adv{layout, 0, {}};
  for (std::size_t k = 0; k <= q; ++k) {
    std::vector<Gate> step{hadamard_gate(layout, "X")};
    if (k > 0) step.push_back(hadamard_gate(layout, "Y"));
    if (layout.has("B") && k < q) step.push_back(xor_constant_gate(layout, "B", rng.below(2)));
    adv.steps.push_back(std::move(step));
  }
  return adv;
}

AdversaryCircuit guessing_adversary(const RegisterLayout& layout, std::size_t q,
                                    const std::vector<std::pair<Index, Index>>& guesses) {
  AdversaryCircuit adv{layout, 0, std::vector<std::vector<Gate>>(q + 1)};
  if (guesses.size() > output_pair_count(layout)) throw std::invalid_argument("layout has fewer output pairs than guesses");
  for (std::size_t i = 0; i < guesses.size(); ++i) {
    auto ox = "ox" + std::to_string(i + 1), oy = "oy" + std::to_string(i + 1);
    if (guesses[i].first) adv.steps.back().push_back(xor_constant_gate(layout, ox, guesses[i].first));
    if (guesses[i].second) adv.steps.back().push_back(xor_constant_gate(layout, oy, guesses[i].second));
  }
  return adv;
}

}  // namespace qperm
