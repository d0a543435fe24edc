// qlinalg.cpp

#include "qperm/qlinalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace qperm {

// ---------------------------------------------------------------- layout

RegisterLayout::RegisterLayout(std::vector<std::pair<std::string, Index>> registers) {
  std::unordered_set<std::string> seen;
  for (auto& [name, card] : registers) {
    if (card < 1) throw std::invalid_argument("register '" + name + "' has cardinality 0");
    if (!seen.insert(name).second) throw std::invalid_argument("duplicate register name '" + name + "'");
    names_.push_back(name);
    cards_.push_back(card);
  }
  strides_.assign(cards_.size(), 1);
  dim_ = 1;
  for (std::size_t i = cards_.size(); i-- > 0;) {
    strides_[i] = dim_;
    if (dim_ > std::numeric_limits<Index>::max() / cards_[i])
      throw std::overflow_error("register layout dimension exceeds 64-bit index range");
    dim_ *= cards_[i];
  }
}

bool RegisterLayout::has(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t RegisterLayout::position(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::invalid_argument("unknown register '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

Index RegisterLayout::encode(const std::vector<Index>& digits) const {
  if (digits.size() != cards_.size()) throw std::invalid_argument("digit count does not match layout");
  Index idx = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] >= cards_[i]) throw std::out_of_range("digit out of range for register '" + names_[i] + "'");
    idx += digits[i] * strides_[i];
  }
  return idx;
}

std::vector<Index> RegisterLayout::decode(Index index) const {
  if (index >= dim_) throw std::out_of_range("basis index out of range");
  std::vector<Index> d(cards_.size());
  for (std::size_t i = 0; i < cards_.size(); ++i) d[i] = (index / strides_[i]) % cards_[i];
  return d;
}

RegisterLayout RegisterLayout::select(const std::vector<std::string>& names) const {
  std::vector<std::pair<std::string, Index>> regs;
  for (const auto& n : names) regs.emplace_back(n, cards_[position(n)]);
  return RegisterLayout(std::move(regs));
}

std::vector<std::string> RegisterLayout::complement(const std::vector<std::string>& names) const {
  for (const auto& n : names) position(n);
  std::vector<std::string> out;
  for (const auto& n : names_)
    if (std::find(names.begin(), names.end(), n) == names.end()) out.push_back(n);
  return out;
}

RegisterLayout RegisterLayout::concat(const RegisterLayout& other) const {
  auto regs = registers();
  auto more = other.registers();
  regs.insert(regs.end(), more.begin(), more.end());
  return RegisterLayout(std::move(regs));
}

std::vector<std::pair<std::string, Index>> RegisterLayout::registers() const {
  std::vector<std::pair<std::string, Index>> regs;
  for (std::size_t i = 0; i < names_.size(); ++i) regs.emplace_back(names_[i], cards_[i]);
  return regs;
}

RegisterView::RegisterView(const RegisterLayout& full, const std::vector<std::string>& names)
    : sub_(full.select(names)) {
  for (const auto& n : names) {
    positions_.push_back(full.position(n));
    full_strides_.push_back(full.stride(positions_.back()));
  }
}

Index RegisterView::extract(Index full_index) const {
  Index sub = 0;
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    Index d = (full_index / full_strides_[i]) % sub_.cardinality(i);
    sub += d * sub_.stride(i);
  }
  return sub;
}

Index RegisterView::replace(Index full_index, Index sub_index) const {
  Index out = full_index;
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    Index old_d = (full_index / full_strides_[i]) % sub_.cardinality(i);
    Index new_d = (sub_index / sub_.stride(i)) % sub_.cardinality(i);
    out = out - old_d * full_strides_[i] + new_d * full_strides_[i];
  }
  return out;
}

// ---------------------------------------------------------------- states

SparseState SparseState::basis(const RegisterLayout& layout, Index index) {
  if (index >= layout.dimension()) throw std::out_of_range("basis index out of range");
  SparseState s(layout);
  s.amps_[index] = 1.0;
  return s;
}

SparseState SparseState::from_digits(const RegisterLayout& layout, const std::vector<Index>& digits) {
  return basis(layout, layout.encode(digits));
}

SparseState SparseState::from_dense(const RegisterLayout& layout, const Vector& v) {
  if (static_cast<Index>(v.size()) != layout.dimension()) throw std::invalid_argument("dense vector size mismatch");
  SparseState s(layout);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > kDropThreshold) s.amps_[static_cast<Index>(i)] = v[i];
  return s;
}

void SparseState::add(Index index, cplx amplitude) {
  if (!std::isfinite(amplitude.real()) || !std::isfinite(amplitude.imag()))
    throw std::domain_error("non-finite amplitude");
  amps_[index] += amplitude;
}

void SparseState::set(Index index, cplx amplitude) { amps_[index] = amplitude; }

cplx SparseState::amplitude(Index index) const {
  auto it = amps_.find(index);
  return it == amps_.end() ? cplx{} : it->second;
}

void SparseState::prune(double threshold) {
  for (auto it = amps_.begin(); it != amps_.end();) {
    if (std::abs(it->second) <= threshold)
      amps_.erase(it++);
    else
      ++it;
  }
}

double SparseState::norm_squared() const {
  double s = 0;
  for (const auto& [i, a] : sorted_entries()) s += std::norm(a);
  return s;
}

double SparseState::norm() const { return std::sqrt(norm_squared()); }

cplx SparseState::inner(const SparseState& other) const {
  cplx s{};
  const bool small_here = amps_.size() <= other.amps_.size();
  const auto& small = small_here ? amps_ : other.amps_;
  const auto& large = small_here ? other.amps_ : amps_;
  std::vector<std::pair<Index, cplx>> terms;
  for (const auto& [i, a] : small) {
    auto it = large.find(i);
    if (it == large.end()) continue;
    terms.emplace_back(i, small_here ? std::conj(a) * it->second : std::conj(it->second) * a);
  }
  std::sort(terms.begin(), terms.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (const auto& t : terms) s += t.second;
  return s;
}

SparseState SparseState::normalized() const {
  double n = norm();
  if (n == 0) throw std::domain_error("cannot normalize the zero state");
  SparseState out = *this;
  out *= 1.0 / n;
  return out;
}

Vector SparseState::to_dense() const {
  if (layout_.dimension() > (Index{1} << 26)) throw std::length_error("layout too large for a dense vector");
  Vector v = Vector::Zero(static_cast<Eigen::Index>(layout_.dimension()));
  for (const auto& [i, a] : amps_) v[static_cast<Eigen::Index>(i)] = a;
  return v;
}

std::vector<std::pair<Index, cplx>> SparseState::sorted_entries() const {
  std::vector<std::pair<Index, cplx>> out(amps_.begin(), amps_.end());
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  return out;
}

SparseState& SparseState::operator+=(const SparseState& other) {
  if (!(layout_ == other.layout_)) throw std::invalid_argument("layout mismatch in state addition");
  for (const auto& [i, a] : other.amps_) amps_[i] += a;
  prune();
  return *this;
}

SparseState& SparseState::operator-=(const SparseState& other) {
  if (!(layout_ == other.layout_)) throw std::invalid_argument("layout mismatch in state subtraction");
  for (const auto& [i, a] : other.amps_) amps_[i] -= a;
  prune();
  return *this;
}

SparseState& SparseState::operator*=(cplx s) {
  for (auto& [i, a] : amps_) a *= s;
  prune();
  return *this;
}

SparseState SparseState::tensor(const SparseState& other) const {
  RegisterLayout joint = layout_.concat(other.layout_);
  SparseState out(joint);
  const Index d2 = other.layout_.dimension();
  for (const auto& [i, a] : amps_)
    for (const auto& [j, b] : other.amps_) out.amps_[i * d2 + j] = a * b;
  out.prune();
  return out;
}

SparseState operator+(SparseState a, const SparseState& b) { return a += b; }
SparseState operator-(SparseState a, const SparseState& b) { return a -= b; }
SparseState operator*(cplx s, SparseState a) { return a *= s; }
double distance(const SparseState& a, const SparseState& b) { return (a - b).norm(); }

// ---------------------------------------------------------------- operators

namespace {

StateMap column_map(const RegisterLayout& layout, ColumnAction action) {
  return [layout, action = std::move(action)](const SparseState& s) {
    if (!(s.layout() == layout)) throw std::invalid_argument("operator applied to a state on a different layout");
    SparseState out(layout);
    out.reserve(2 * s.support_size());
    for (const auto& [idx, amp] : s.amplitudes()) {
      action(idx, [&](Index row, cplx v) { out.add(row, amp * v); });
    }
    out.prune();
    return out;
  };
}

}  // namespace

LinearOp::LinearOp(RegisterLayout layout, StateMap forward, StateMap adjoint)
    : layout_(std::move(layout)), fwd_(std::move(forward)), adj_(std::move(adjoint)) {}

LinearOp LinearOp::from_columns(const RegisterLayout& layout, ColumnAction forward, ColumnAction adjoint) {
  return LinearOp(layout, column_map(layout, std::move(forward)), column_map(layout, std::move(adjoint)));
}

LinearOp LinearOp::hermitian(const RegisterLayout& layout, ColumnAction action) {
  auto m = column_map(layout, std::move(action));
  return LinearOp(layout, m, m);
}

LinearOp LinearOp::identity(const RegisterLayout& layout) {
  StateMap id = [](const SparseState& s) { return s; };
  return LinearOp(layout, id, id);
}

LinearOp LinearOp::zero(const RegisterLayout& layout) {
  StateMap z = [layout](const SparseState&) { return SparseState(layout); };
  return LinearOp(layout, z, z);
}

LinearOp LinearOp::diagonal(const RegisterLayout& layout, std::function<double(Index)> value) {
  return hermitian(layout, [value = std::move(value)](Index i, const Emit& emit) {
    double v = value(i);
    if (v != 0.0) emit(i, v);
  });
}

LinearOp LinearOp::permutation(const RegisterLayout& layout, std::function<Index(Index)> perm,
                               std::function<Index(Index)> inverse) {
  return from_columns(
      layout, [perm = std::move(perm)](Index i, const Emit& emit) { emit(perm(i), 1.0); },
      [inverse = std::move(inverse)](Index i, const Emit& emit) { emit(inverse(i), 1.0); });
}

LinearOp LinearOp::dense(const RegisterLayout& layout, const Matrix& m) {
  return dense_on(m, [&] {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < layout.size(); ++i) names.push_back(layout.name(i));
    return names;
  }(), layout);
}

SparseState LinearOp::apply(const SparseState& s) const {
  if (!fwd_) throw std::logic_error("empty operator");
  return fwd_(s);
}

SparseState LinearOp::apply_adjoint(const SparseState& s) const {
  if (!adj_) throw std::logic_error("empty operator");
  return adj_(s);
}

Matrix LinearOp::to_dense() const {
  const Index d = layout_.dimension();
  if (d > 4096) throw std::length_error("layout too large for a dense matrix");
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Index c = 0; c < d; ++c) {
    SparseState col = apply(SparseState::basis(layout_, c));
    for (const auto& [r, a] : col.amplitudes()) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a;
  }
  return m;
}

LinearOp compose(const LinearOp& a, const LinearOp& b) {
  if (!(a.layout() == b.layout())) throw std::invalid_argument("layout mismatch in composition");
  return LinearOp(
      a.layout(), [a, b](const SparseState& s) { return a.apply(b.apply(s)); },
      [a, b](const SparseState& s) { return b.apply_adjoint(a.apply_adjoint(s)); });
}

LinearOp compose(const std::vector<LinearOp>& ops) {
  if (ops.empty()) throw std::invalid_argument("empty composition");
  LinearOp out = ops.back();
  for (std::size_t i = ops.size() - 1; i-- > 0;) out = compose(ops[i], out);
  return out;
}

LinearOp operator+(const LinearOp& a, const LinearOp& b) {
  if (!(a.layout() == b.layout())) throw std::invalid_argument("layout mismatch in operator sum");
  return LinearOp(
      a.layout(), [a, b](const SparseState& s) { return a.apply(s) + b.apply(s); },
      [a, b](const SparseState& s) { return a.apply_adjoint(s) + b.apply_adjoint(s); });
}

LinearOp operator-(const LinearOp& a, const LinearOp& b) {
  if (!(a.layout() == b.layout())) throw std::invalid_argument("layout mismatch in operator difference");
  return LinearOp(
      a.layout(), [a, b](const SparseState& s) { return a.apply(s) - b.apply(s); },
      [a, b](const SparseState& s) { return a.apply_adjoint(s) - b.apply_adjoint(s); });
}

LinearOp scaled(const LinearOp& a, cplx s) {
  return LinearOp(
      a.layout(), [a, s](const SparseState& x) { return s * a.apply(x); },
      [a, s](const SparseState& x) { return std::conj(s) * a.apply_adjoint(x); });
}

namespace {

void check_targets(const RegisterLayout& sub, const std::vector<std::string>& targets, const RegisterLayout& layout) {
  if (sub.size() != targets.size()) throw std::invalid_argument("target count does not match operator registers");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!layout.has(targets[i])) throw std::invalid_argument("unknown register '" + targets[i] + "'");
    if (layout.cardinality(targets[i]) != sub.cardinality(i))
      throw std::invalid_argument("cardinality mismatch for register '" + targets[i] + "'");
  }
}

// Applies `map` (on the target sub-layout) to each slice of the state with
// fixed values of the other registers.
SparseState apply_sliced(const SparseState& s, const RegisterView& view, const RegisterLayout& layout,
                         const std::function<SparseState(Index rest, const SparseState&)>& map) {
  std::map<Index, SparseState> slices;
  for (const auto& [idx, amp] : s.amplitudes()) {
    Index rest = view.rest(idx);
    auto it = slices.find(rest);
    if (it == slices.end()) it = slices.emplace(rest, SparseState(view.sub_layout())).first;
    it->second.set(view.extract(idx), amp);
  }
  SparseState out(layout);
  for (const auto& [rest, slice] : slices) {
    SparseState mapped = map(rest, slice);
    for (const auto& [sub, amp] : mapped.amplitudes()) out.add(view.replace(rest, sub), amp);
  }
  out.prune();
  return out;
}

}  // namespace

LinearOp tensor_embed(const LinearOp& op, const std::vector<std::string>& targets, const RegisterLayout& layout) {
  check_targets(op.layout(), targets, layout);
  auto view = std::make_shared<RegisterView>(layout, targets);
  // Relabel the sub-layout so slices match the operator's own layout.
  auto fwd = [op, view, layout](const SparseState& s) {
    return apply_sliced(s, *view, layout, [&](Index, const SparseState& slice) {
      SparseState in(op.layout());
      for (const auto& [i, a] : slice.amplitudes()) in.set(i, a);
      SparseState r = op.apply(in);
      SparseState back(view->sub_layout());
      for (const auto& [i, a] : r.amplitudes()) back.set(i, a);
      return back;
    });
  };
  auto adj = [op, view, layout](const SparseState& s) {
    return apply_sliced(s, *view, layout, [&](Index, const SparseState& slice) {
      SparseState in(op.layout());
      for (const auto& [i, a] : slice.amplitudes()) in.set(i, a);
      SparseState r = op.apply_adjoint(in);
      SparseState back(view->sub_layout());
      for (const auto& [i, a] : r.amplitudes()) back.set(i, a);
      return back;
    });
  };
  return LinearOp(layout, fwd, adj);
}

LinearOp dense_on(const Matrix& m, const std::vector<std::string>& targets, const RegisterLayout& layout) {
  auto view = std::make_shared<RegisterView>(layout, targets);
  const Index d = view->sub_layout().dimension();
  if (static_cast<Index>(m.rows()) != d || static_cast<Index>(m.cols()) != d)
    throw std::invalid_argument("dense matrix size does not match target registers");
  auto mat = std::make_shared<Matrix>(m);
  auto madj = std::make_shared<Matrix>(m.adjoint());
  // Gather all slices as columns of one matrix so the product is a single GEMM.
  auto make = [view, layout](std::shared_ptr<Matrix> mm) {
    return [view, layout, mm](const SparseState& s) {
      if (!(s.layout() == layout)) throw std::invalid_argument("operator applied to a state on a different layout");
      std::unordered_map<Index, Eigen::Index> slot;
      slot.reserve(s.support_size());
      std::vector<Index> rests;
      for (const auto& [idx, amp] : s.amplitudes())
        if (slot.emplace(view->rest(idx), static_cast<Eigen::Index>(rests.size())).second) rests.push_back(view->rest(idx));
      Matrix cols = Matrix::Zero(mm->cols(), static_cast<Eigen::Index>(rests.size()));
      for (const auto& [idx, amp] : s.amplitudes())
        cols(static_cast<Eigen::Index>(view->extract(idx)), slot[view->rest(idx)]) = amp;
      Matrix r = (*mm) * cols;
      SparseState out(layout);
      for (Eigen::Index j = 0; j < r.cols(); ++j)
        for (Eigen::Index i = 0; i < r.rows(); ++i)
          if (std::abs(r(i, j)) > SparseState::kDropThreshold)
            out.set(view->replace(rests[static_cast<std::size_t>(j)], static_cast<Index>(i)), r(i, j));
      return out;
    };
  };
  return LinearOp(layout, make(mat), make(madj));
}

LinearOp controlled(const std::vector<std::string>& controls, const std::vector<std::string>& targets,
                    const RegisterLayout& layout, std::function<const LinearOp&(Index)> block) {
  auto cview = std::make_shared<RegisterView>(layout, controls);
  auto tview = std::make_shared<RegisterView>(layout, targets);
  auto make = [=](bool adjoint) {
    return [=](const SparseState& s) {
      return apply_sliced(s, *tview, layout, [&](Index rest, const SparseState& slice) {
        const LinearOp& op = block(cview->extract(rest));
        SparseState in(op.layout());
        for (const auto& [i, a] : slice.amplitudes()) in.set(i, a);
        SparseState r = adjoint ? op.apply_adjoint(in) : op.apply(in);
        SparseState back(tview->sub_layout());
        for (const auto& [i, a] : r.amplitudes()) back.set(i, a);
        return back;
      });
    };
  };
  return LinearOp(layout, make(false), make(true));
}

// ---------------------------------------------------------------- density matrices

DensityMatrix::DensityMatrix(Matrix entries) : m_(std::move(entries)) {
  if (m_.rows() != m_.cols()) throw std::invalid_argument("density matrix must be square");
}

DensityMatrix DensityMatrix::pure(const Vector& v) { return DensityMatrix(v * v.adjoint()); }

DensityMatrix DensityMatrix::zeros(Index dimension) {
  return DensityMatrix(Matrix::Zero(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(dimension)));
}

bool DensityMatrix::is_hermitian(double tol) const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol; }

DensityMatrix& DensityMatrix::operator+=(const DensityMatrix& other) {
  if (other.m_.rows() != m_.rows()) throw std::invalid_argument("dimension mismatch");
  m_ += other.m_;
  return *this;
}

DensityMatrix& DensityMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

DensityMatrix partial_trace(const SparseState& state, const std::vector<std::string>& keep) {
  if (keep.empty()) throw std::invalid_argument("partial trace needs at least one kept register");
  const RegisterLayout& layout = state.layout();
  RegisterView kept(layout, keep);
  const Index d = kept.sub_layout().dimension();
  if (d > 8192) throw std::length_error("kept subsystem too large for a dense density matrix");
  std::map<Index, std::vector<std::pair<Index, cplx>>> by_rest;
  for (const auto& [idx, amp] : state.sorted_entries()) by_rest[kept.rest(idx)].emplace_back(kept.extract(idx), amp);
  Matrix rho = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& [rest, entries] : by_rest)
    for (const auto& [i, a] : entries)
      for (const auto& [j, b] : entries) rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += a * std::conj(b);
  return DensityMatrix(std::move(rho));
}

std::vector<double> hermitian_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
  if (m.size() == 0) return {};
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw std::invalid_argument("matrix is not Hermitian");
  Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const auto& q = es.eigenvectors();
  const auto& lam = es.eigenvalues();
  double residual = (h - q * lam.cast<cplx>().asDiagonal() * q.adjoint()).norm();
  if (residual > 1e-8 * static_cast<double>(m.rows()) * scale)
    throw std::runtime_error("eigendecomposition residual above tolerance");
  std::vector<std::pair<double, Eigen::Index>> vals;
  for (Eigen::Index i = 0; i < lam.size(); ++i) vals.emplace_back(lam[i], i);
  std::sort(vals.begin(), vals.end());
  std::vector<double> out;
  for (const auto& v : vals) out.push_back(v.first);
  return out;
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dimension() != b.dimension()) throw std::invalid_argument("dimension mismatch in trace distance");
  if (!a.is_hermitian(1e-10) || !b.is_hermitian(1e-10)) throw std::invalid_argument("trace distance needs Hermitian inputs");
  double s = 0;
  for (double l : hermitian_eigenvalues(a.entries() - b.entries())) s += std::abs(l);
  return 0.5 * s;
}

double restricted_norm(const SparseState& state, const LinearOp& size_projector) {
  return size_projector.apply(state).norm();
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Matrix g = m.adjoint() * m;
  if (static_cast<std::size_t>(g.rows()) <= kExactNormMaxDim) {
    auto ev = hermitian_eigenvalues(g);
    return std::sqrt(std::max(0.0, ev.back()));
  }
  Vector v = Vector::Ones(g.rows()).normalized();
  double lambda = 0;
  for (int it = 0; it < kPowerIterations; ++it) {
    Vector w = g * v;
    double next = w.norm();
    if (next == 0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= kPowerTolerance * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

double restricted_operator_norm(const LinearOp& op, const std::vector<Index>& columns) {
  std::vector<SparseState> cols;
  std::map<Index, Eigen::Index> rows;
  for (Index c : columns) {
    cols.push_back(op.apply(SparseState::basis(op.layout(), c)));
    for (const auto& [r, a] : cols.back().amplitudes()) rows.emplace(r, 0);
  }
  Eigen::Index k = 0;
  for (auto& [r, pos] : rows) pos = k++;
  Matrix m = Matrix::Zero(k, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (const auto& [r, a] : cols[j].amplitudes()) m(rows[r], static_cast<Eigen::Index>(j)) = a;
  return operator_norm(m);
}

}  // namespace qperm
