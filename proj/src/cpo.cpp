// cpo.cpp

#include "qperm/cpo.hpp"

#include <cmath>
#include <stdexcept>

namespace qperm {

namespace {

bool is_power_of_two(Index v) { return v != 0 && (v & (v - 1)) == 0; }

std::vector<std::string> register_names(const RegisterLayout& layout) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layout.size(); ++i) names.push_back(layout.name(i));
  return names;
}

}  // namespace

void PermOracleConfig::validate() const {
  if (!is_power_of_two(N)) throw std::invalid_argument("N must be a power of two");
  if (t_max > N) throw std::invalid_argument("t_max must not exceed N");
}

LinearOp build_pc(const PermOracleConfig& cfg, const RegisterLayout& layout, const std::string& xreg,
                  const std::string& dreg) {
  const std::size_t xpos = layout.position(xreg);
  if (layout.cardinality(xpos) != cfg.N) throw std::invalid_argument("input register size differs from N");
  return swap_compression(
      layout, dreg, cfg.codec(), [layout, xpos](Index i) { return layout.digit(i, xpos); }, values_outside_image(),
      cfg.t_max);
}

LinearOp build_pc_at(const PermOracleConfig& cfg, const RegisterLayout& layout, Index x, const std::string& dreg) {
  if (x >= cfg.N) throw std::invalid_argument("input out of range");
  return swap_compression(layout, dreg, cfg.codec(), [x](Index) { return x; }, values_outside_image(), cfg.t_max);
}

LinearOp build_flip(const PermOracleConfig& cfg, const RegisterLayout& layout, const std::string& dreg) {
  const std::size_t dpos = layout.position(dreg);
  const DbCodec codec = cfg.codec();
  if (layout.cardinality(dpos) != codec.cardinality()) throw std::invalid_argument("database register mismatch");
  auto f = [=](Index i) { return layout.with_digit(i, dpos, codec.flip(layout.digit(i, dpos))); };
  return LinearOp::permutation(layout, f, f);
}

LinearOp build_cp(const PermOracleConfig& cfg, const RegisterLayout& layout) {
  cfg.validate();
  LinearOp pc = build_pc(cfg, layout);
  return build_cp_from(cfg, layout, pc, pc);
}

LinearOp build_cp_from(const PermOracleConfig& cfg, const RegisterLayout& layout, const LinearOp& forward_pc,
                       const LinearOp& inverse_pc) {
  cfg.validate();
  if (layout.cardinality("B") != 2) throw std::invalid_argument("direction register B must be a bit");
  LinearOp f = build_flip(cfg, layout);
  LinearOp query = build_purified_query(layout, cfg.codec());
  LinearOp forward = compose({forward_pc, query, forward_pc.adjoint()});
  LinearOp inverse = compose({f, inverse_pc, query, inverse_pc.adjoint(), f});
  // Block diagonal in the direction bit: split the state, apply each branch, merge.
  const std::size_t bpos = layout.position("B");
  auto branch = [layout, bpos, forward, inverse](bool adjoint) {
    return [=](const SparseState& s) {
      SparseState parts[2] = {SparseState(layout), SparseState(layout)};
      for (const auto& [i, a] : s.amplitudes()) parts[layout.digit(i, bpos)].set(i, a);
      SparseState out = adjoint ? forward.apply_adjoint(parts[0]) : forward.apply(parts[0]);
      out += adjoint ? inverse.apply_adjoint(parts[1]) : inverse.apply(parts[1]);
      return out;
    };
  };
  return LinearOp(layout, branch(false), branch(true));
}

LinearOp permutation_oracle(const RegisterLayout& layout, const Permutation& phi) {
  const std::size_t bpos = layout.position("B"), xpos = layout.position("X"), ypos = layout.position("Y");
  if (phi.size() != layout.cardinality(xpos)) throw std::invalid_argument("permutation size differs from X");
  const Permutation inv = phi.inverse();
  auto map = [=](Index i) {
    const Index x = layout.digit(i, xpos);
    const Index v = layout.digit(i, bpos) ? inv(x) : phi(x);
    return layout.with_digit(i, ypos, layout.digit(i, ypos) ^ v);
  };
  return LinearOp::permutation(layout, map, map);
}

StandardView run_perm_standard_experiment(const PermOracleConfig& cfg, const AdversaryCircuit& adv, Index max_n,
                                          const std::vector<std::string>& keep) {
  cfg.validate();
  validate(adv);
  if (cfg.N > max_n) throw std::length_error("permutation enumeration cap exceeded");
  const std::vector<std::string> kept = keep.empty() ? register_names(adv.layout) : keep;
  const Index dim = adv.layout.select(kept).dimension();
  if (dim > 4096) throw std::length_error("adversary view too large for a dense matrix");
  const SparseState init = SparseState::basis(adv.layout, adv.initial);
  DensityMatrix sum = DensityMatrix::zeros(dim);
  const auto perms = all_permutations(cfg.N);
  for (const auto& phi : perms) sum += partial_trace(run_queries(adv, init, permutation_oracle(adv.layout, phi)), kept);
  StandardView out;
  out.samples = perms.size();
  sum *= 1.0 / static_cast<double>(perms.size());
  out.rho = sum;
  return out;
}

CompressedRun run_cp_experiment(const PermOracleConfig& cfg, const AdversaryCircuit& adv, bool with_view) {
  cfg.validate();
  validate(adv);
  SparseState init = compressed_initial_state(adv, cfg.codec());
  CompressedRun out;
  out.state = run_queries(adv, init, build_cp(cfg, init.layout()));
  if (with_view) out.view = partial_trace(out.state, register_names(adv.layout));
  return out;
}

LemmaCheck perm_fundamental_lemma_on_state(const PermOracleConfig& cfg, const SparseState& psi, std::size_t l,
                                           Index t) {
  if (cfg.N <= t + l) throw std::invalid_argument("N - t - l must be positive");
  const RegisterLayout& layout = psi.layout();
  const DbCodec codec = cfg.codec();
  const std::size_t dpos = layout.position("D");
  PermOracleConfig full = cfg;
  full.t_max = cfg.N;

  std::vector<std::size_t> xs, ys;
  for (std::size_t i = 1; i <= l; ++i) {
    const std::string ox = "ox" + std::to_string(i), oy = "oy" + std::to_string(i);
    if (!layout.has(ox) || !layout.has(oy)) throw std::invalid_argument("missing output register " + ox);
    if (layout.cardinality(ox) != cfg.N || layout.cardinality(oy) != cfg.N)
      throw std::invalid_argument("malformed output register " + ox);
    xs.push_back(layout.position(ox));
    ys.push_back(layout.position(oy));
  }
  LinearOp distinct = LinearOp::diagonal(layout, [=](Index k) {
    for (std::size_t a = 0; a < xs.size(); ++a)
      for (std::size_t b = a + 1; b < xs.size(); ++b)
        if (layout.digit(k, xs[a]) == layout.digit(k, xs[b])) return 0.0;
    return 1.0;
  });

  SparseState compressed = distinct.apply(psi), decompressed = compressed;
  for (std::size_t i = l; i-- > 0;) {
    const std::size_t xp = xs[i], yp = ys[i];
    LinearOp check = LinearOp::diagonal(layout, [=](Index k) {
      return codec.get(layout.digit(k, dpos), layout.digit(k, xp)) == layout.digit(k, yp) ? 1.0 : 0.0;
    });
    LinearOp pc = swap_compression(
        layout, "D", codec, [layout, xp](Index k) { return layout.digit(k, xp); }, values_outside_image(), full.t_max);
    compressed = check.apply(compressed);
    decompressed = pc.apply(check.apply(pc.apply(decompressed)));
  }
  LemmaCheck out;
  out.lhs = decompressed.norm();
  out.compressed = compressed.norm();
  out.rhs = out.compressed + static_cast<double>(l) / std::sqrt(static_cast<double>(cfg.N - t - l));
  return out;
}

LemmaCheck perm_fundamental_lemma_check(const PermOracleConfig& cfg, const AdversaryCircuit& adv, std::size_t l) {
  auto run = run_cp_experiment(cfg, adv, false);
  return perm_fundamental_lemma_on_state(cfg, run.state, l, adv.queries());
}

nlohmann::json perm_record(const PermOracleConfig& cfg, std::size_t q, std::uint64_t seed, double trace_distance,
                           const LemmaCheck& check) {
  return {{"N", cfg.N},         {"q", q},
          {"seed", seed},       {"trace_distance", trace_distance},
          {"lemma_lhs", check.lhs}, {"lemma_rhs", check.rhs}};
}

}  // namespace qperm
