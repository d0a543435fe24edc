// cfo.cpp

#include "qperm/cfo.hpp"

#include <algorithm>
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

void FunctionOracleConfig::validate() const {
  if (M == 0 || !is_power_of_two(N)) throw std::invalid_argument("N must be a power of two and M positive");
  if (t_max > M) throw std::invalid_argument("t_max must not exceed M");
}

CompletionSet all_values() {
  return [](const DbCodec& codec, Index, Index) {
    std::vector<Index> s(codec.n());
    for (Index y = 0; y < codec.n(); ++y) s[y] = y;
    return s;
  };
}

CompletionSet values_outside_image() {
  return [](const DbCodec& codec, Index d0, Index) {
    std::vector<bool> used(codec.n(), false);
    for (Index x = 0; x < codec.m(); ++x) {
      Index v = codec.get(d0, x);
      if (v != codec.n()) used[v] = true;
    }
    std::vector<Index> s;
    for (Index y = 0; y < codec.n(); ++y)
      if (!used[y]) s.push_back(y);
    return s;
  };
}

namespace {

LinearOp swap_impl(const RegisterLayout& layout, const std::string& dreg, const DbCodec& codec,
                   std::function<Index(Index)> x_of, IndexedCompletionSet completions, Index t_max,
                   bool empty_is_identity) {
  const std::size_t dpos = layout.position(dreg);
  if (layout.cardinality(dpos) != codec.cardinality())
    throw std::invalid_argument("database register does not match the codec");
  return LinearOp::hermitian(layout, [=](Index i, const Emit& emit) {
    const Index x = x_of(i);
    if (x == kNoInput) {
      emit(i, 1.0);
      return;
    }
    const Index raw = layout.digit(i, dpos);
    const Index cur = codec.get(raw, x);
    const Index d0 = codec.set(raw, x, codec.n());
    auto at = [&](Index r) { return layout.with_digit(i, dpos, r); };
    const auto s = completions(at(d0), x);
    if (s.empty()) {
      if (!empty_is_identity) throw std::invalid_argument("empty completion set");
      emit(i, 1.0);
      return;
    }
    if (cur == codec.n()) {
      if (codec.size(d0) + 1 > t_max) throw std::length_error("database cap exceeded");
      const double a = 1.0 / std::sqrt(static_cast<double>(s.size()));
      for (Index y : s) emit(at(codec.set(d0, x, y)), a);
      return;
    }
    if (!std::binary_search(s.begin(), s.end(), cur)) {
      emit(i, 1.0);
      return;
    }
    const double k = static_cast<double>(s.size());
    emit(i, 1.0);
    for (Index y : s) emit(at(codec.set(d0, x, y)), -1.0 / k);
    emit(at(d0), 1.0 / std::sqrt(k));
  });
}

}  // namespace

LinearOp swap_compression(const RegisterLayout& layout, const std::string& dreg, const DbCodec& codec,
                          std::function<Index(Index)> x_of, CompletionSet completions, Index t_max) {
  const std::size_t dpos = layout.position(dreg);
  auto indexed = [layout, dpos, codec, completions](Index base, Index x) {
    return completions(codec, layout.digit(base, dpos), x);
  };
  return swap_impl(layout, dreg, codec, std::move(x_of), indexed, t_max, false);
}

LinearOp swap_compression_indexed(const RegisterLayout& layout, const std::string& dreg, const DbCodec& codec,
                                  std::function<Index(Index)> x_of, IndexedCompletionSet completions, Index t_max) {
  return swap_impl(layout, dreg, codec, std::move(x_of), std::move(completions), t_max, true);
}

LinearOp build_fc(const FunctionOracleConfig& cfg, const RegisterLayout& layout, Index x, const std::string& dreg) {
  if (x >= cfg.M) throw std::invalid_argument("input out of range");
  return swap_compression(layout, dreg, cfg.codec(), [x](Index) { return x; }, all_values(), cfg.t_max);
}

LinearOp build_fc_controlled(const FunctionOracleConfig& cfg, const RegisterLayout& layout, const std::string& xreg,
                             const std::string& dreg) {
  const std::size_t xpos = layout.position(xreg);
  if (layout.cardinality(xpos) != cfg.M) throw std::invalid_argument("input register size differs from M");
  return swap_compression(
      layout, dreg, cfg.codec(), [layout, xpos](Index i) { return layout.digit(i, xpos); }, all_values(), cfg.t_max);
}

LinearOp build_purified_query(const RegisterLayout& layout, const DbCodec& codec, const std::string& xreg,
                              const std::string& yreg, const std::string& dreg) {
  const std::size_t xpos = layout.position(xreg), ypos = layout.position(yreg), dpos = layout.position(dreg);
  if (layout.cardinality(ypos) != codec.n() || !is_power_of_two(codec.n()))
    throw std::invalid_argument("output register must have power-of-two size N");
  auto f = [=](Index i) {
    const Index v = codec.get(layout.digit(i, dpos), layout.digit(i, xpos));
    if (v == codec.n()) return i;
    return layout.with_digit(i, ypos, layout.digit(i, ypos) ^ v);
  };
  return LinearOp::permutation(layout, f, f);
}

LinearOp build_cf(const FunctionOracleConfig& cfg, const RegisterLayout& layout) {
  cfg.validate();
  LinearOp fc = build_fc_controlled(cfg, layout);
  return compose({fc, build_purified_query(layout, cfg.codec()), fc});
}

LinearOp decompressed_projector(const FunctionOracleConfig& cfg, const RegisterLayout& layout, Index x,
                                const std::string& dreg) {
  const std::size_t dpos = layout.position(dreg);
  const DbCodec codec = cfg.codec();
  return LinearOp::diagonal(layout, [=](Index i) { return codec.get(layout.digit(i, dpos), x) != codec.n() ? 1.0 : 0.0; });
}

LinearOp validity_projector(const FunctionOracleConfig& cfg, const RegisterLayout& layout, const std::string& dreg) {
  FunctionOracleConfig full = cfg;
  full.t_max = cfg.M;
  std::vector<LinearOp> factors;
  for (Index x = 0; x < cfg.M; ++x) {
    LinearOp fc = build_fc(full, layout, x, dreg);
    factors.push_back(compose({fc, decompressed_projector(cfg, layout, x, dreg), fc}));
  }
  return compose(factors);
}

RegisterLayout compressed_layout(const RegisterLayout& adversary, const DbCodec& codec) {
  return adversary.concat(RegisterLayout({{"D", codec.cardinality()}}));
}

SparseState compressed_initial_state(const AdversaryCircuit& adv, const DbCodec& codec) {
  RegisterLayout d({{"D", codec.cardinality()}});
  return SparseState::basis(adv.layout, adv.initial).tensor(SparseState::basis(d, codec.empty()));
}

double amplitude_outside(const SparseState& state, const DbCodec& codec, Index q, const std::string& dreg) {
  const std::size_t dpos = state.layout().position(dreg);
  double sq = 0;
  for (const auto& [i, a] : state.amplitudes())
    if (codec.size(state.layout().digit(i, dpos)) > q) sq += std::norm(a);
  return std::sqrt(sq);
}

LinearOp function_oracle(const RegisterLayout& layout, const std::vector<Index>& f) {
  const std::size_t xpos = layout.position("X"), ypos = layout.position("Y");
  if (f.size() != layout.cardinality(xpos)) throw std::invalid_argument("function table size differs from X");
  auto map = [=](Index i) { return layout.with_digit(i, ypos, layout.digit(i, ypos) ^ f[layout.digit(i, xpos)]); };
  return LinearOp::permutation(layout, map, map);
}

StandardView run_standard_experiment(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv, std::uint64_t seed,
                                     std::size_t samples, std::size_t exact_limit) {
  cfg.validate();
  validate(adv);
  const Index dim = adv.layout.dimension();
  if (dim > 4096) throw std::length_error("adversary layout too large for a dense view");
  const SparseState init = SparseState::basis(adv.layout, adv.initial);

  double count = 1;
  for (Index i = 0; i < cfg.M; ++i) count *= static_cast<double>(cfg.N);

  StandardView out;
  Matrix sum = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(sum.rows(), sum.cols());
  std::vector<Index> f(cfg.M, 0);
  auto accumulate = [&] {
    Vector v = run_queries(adv, init, function_oracle(adv.layout, f)).to_dense();
    Matrix r = v * v.adjoint();
    sum += r;
    if (!out.exact) sq += r.cwiseAbs2();
  };

  if (count <= static_cast<double>(exact_limit)) {
    const auto total = static_cast<std::size_t>(count);
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t c = k;
      for (Index x = cfg.M; x-- > 0;) {
        f[x] = c % cfg.N;
        c /= cfg.N;
      }
      accumulate();
    }
    out.samples = total;
  } else {
    out.exact = false;
    Philox rng(seed);
    for (std::size_t k = 0; k < samples; ++k) {
      for (auto& v : f) v = rng.below(cfg.N);
      accumulate();
    }
    out.samples = samples;
  }
  const double n = static_cast<double>(out.samples);
  out.rho = DensityMatrix(sum / n);
  if (!out.exact && n > 1) {
    Eigen::MatrixXd var = (sq / n - (sum / n).cwiseAbs2()).cwiseMax(0.0);
    out.std_error = std::sqrt(var.maxCoeff() / (n - 1));
  }
  return out;
}

CompressedRun run_compressed_experiment(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv, bool with_view) {
  cfg.validate();
  validate(adv);
  const DbCodec codec = cfg.codec();
  SparseState init = compressed_initial_state(adv, codec);
  CompressedRun out;
  out.state = run_queries(adv, init, build_cf(cfg, init.layout()));
  if (with_view) out.view = partial_trace(out.state, register_names(adv.layout));
  return out;
}

LemmaCheck fundamental_lemma_on_state(const FunctionOracleConfig& cfg, const SparseState& psi, std::size_t l) {
  const RegisterLayout& layout = psi.layout();
  const DbCodec codec = cfg.codec();
  const std::size_t dpos = layout.position("D");
  FunctionOracleConfig full = cfg;
  full.t_max = cfg.M;

  SparseState compressed = psi, decompressed = psi;
  for (std::size_t i = l; i >= 1; --i) {
    const std::string ox = "ox" + std::to_string(i), oy = "oy" + std::to_string(i);
    if (!layout.has(ox) || !layout.has(oy)) throw std::invalid_argument("missing output register " + ox);
    if (layout.cardinality(ox) != cfg.M || layout.cardinality(oy) != cfg.N)
      throw std::invalid_argument("malformed output register " + ox);
    const std::size_t xp = layout.position(ox), yp = layout.position(oy);
    LinearOp check = LinearOp::diagonal(layout, [=](Index k) {
      return codec.get(layout.digit(k, dpos), layout.digit(k, xp)) == layout.digit(k, yp) ? 1.0 : 0.0;
    });
    LinearOp fc = swap_compression(
        layout, "D", codec, [layout, xp](Index k) { return layout.digit(k, xp); }, all_values(), full.t_max);
    compressed = check.apply(compressed);
    decompressed = fc.apply(check.apply(fc.apply(decompressed)));
  }
  LemmaCheck out;
  out.lhs = decompressed.norm();
  out.compressed = compressed.norm();
  out.rhs = out.compressed + std::sqrt(static_cast<double>(l) / static_cast<double>(cfg.N));
  return out;
}

LemmaCheck fundamental_lemma_check(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv, std::size_t l) {
  return fundamental_lemma_on_state(cfg, run_compressed_experiment(cfg, adv, false).state, l);
}

bool check_validity_preserved(const FunctionOracleConfig& cfg, const AdversaryCircuit& adv, double tol) {
  cfg.validate();
  validate(adv);
  SparseState s = compressed_initial_state(adv, cfg.codec());
  const LinearOp cf = build_cf(cfg, s.layout());
  const LinearOp xi = validity_projector(cfg, s.layout());
  s = apply_step(adv, 0, s);
  if (distance(xi.apply(s), s) > tol) return false;
  for (std::size_t k = 1; k < adv.steps.size(); ++k) {
    s = cf.apply(s);
    if (distance(xi.apply(s), s) > tol) return false;
    s = apply_step(adv, k, s);
  }
  return true;
}

LinearOp restricted_compression(const FunctionOracleConfig& cfg, const RegisterLayout& layout, Index x,
                                CompletionSet sets, const std::string& dreg) {
  if (x >= cfg.M) throw std::invalid_argument("input out of range");
  CompletionSet sorted = [sets = std::move(sets)](const DbCodec& c, Index d0, Index xx) {
    auto s = sets(c, d0, xx);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  };
  return swap_compression(layout, dreg, cfg.codec(), [x](Index) { return x; }, sorted, cfg.t_max);
}

double compression_distance(const FunctionOracleConfig& cfg, Index x, const CompletionSet& sets, Index t) {
  FunctionOracleConfig full = cfg;
  full.t_max = cfg.M;
  const DbCodec codec = cfg.codec();
  RegisterLayout layout({{"D", codec.cardinality()}});
  LinearOp diff = build_fc(full, layout, x) - restricted_compression(full, layout, x, sets);
  DatabaseSpace space(DbKind::Function, cfg.M, cfg.N, t);
  return restricted_operator_norm(diff, space.raws());
}

nlohmann::json lemma_record(const FunctionOracleConfig& cfg, std::uint64_t seed, const LemmaCheck& check,
                            double trace_distance) {
  return {{"config", {{"M", cfg.M}, {"N", cfg.N}, {"t_max", cfg.t_max}}},
          {"seed", seed},
          {"lhs", check.lhs},
          {"rhs", check.rhs},
          {"trace_distance", trace_distance}};
}

}  // namespace qperm
