// qlinalg.hpp
// Sparse states over named mixed-radix registers, linear operators,
// dense density matrices, partial trace and trace distance.

#pragma once

#include <Eigen/Dense>
#include <absl/container/flat_hash_map.h>

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qperm {

using cplx = std::complex<double>;
using Index = std::uint64_t;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Ordered list of named registers. The first register is the most
// significant digit of the composite basis index.
class RegisterLayout {
 public:
  RegisterLayout() = default;
  explicit RegisterLayout(std::vector<std::pair<std::string, Index>> registers);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t pos) const { return names_.at(pos); }
  Index cardinality(std::size_t pos) const { return cards_.at(pos); }
  Index cardinality(const std::string& name) const { return cards_[position(name)]; }
  Index stride(std::size_t pos) const { return strides_.at(pos); }
  Index dimension() const { return dim_; }

  bool has(const std::string& name) const;
  std::size_t position(const std::string& name) const;  // throws if unknown

  Index encode(const std::vector<Index>& digits) const;
  std::vector<Index> decode(Index index) const;
  Index digit(Index index, std::size_t pos) const { return (index / strides_[pos]) % cards_[pos]; }
  Index with_digit(Index index, std::size_t pos, Index value) const {
    return index + (value - digit(index, pos)) * strides_[pos];
  }

  // Layout with the given registers (in the given order), plus the list of
  // their positions in this layout.
  RegisterLayout select(const std::vector<std::string>& names) const;
  // Registers not named in `names`, in layout order.
  std::vector<std::string> complement(const std::vector<std::string>& names) const;
  // This layout followed by `other`; names must stay unique.
  RegisterLayout concat(const RegisterLayout& other) const;

  std::vector<std::pair<std::string, Index>> registers() const;
  bool operator==(const RegisterLayout& other) const { return names_ == other.names_ && cards_ == other.cards_; }

 private:
  std::vector<std::string> names_;
  std::vector<Index> cards_;
  std::vector<Index> strides_;
  Index dim_ = 1;
};

// Sub-index extraction helper: maps a full index to the composite index of
// a subset of registers, and writes a sub-index back.
class RegisterView {
 public:
  RegisterView(const RegisterLayout& full, const std::vector<std::string>& names);
  Index extract(Index full_index) const;
  Index replace(Index full_index, Index sub_index) const;
  // Full index with the viewed registers zeroed.
  Index rest(Index full_index) const { return replace(full_index, 0); }
  const RegisterLayout& sub_layout() const { return sub_; }

 private:
  std::vector<std::size_t> positions_;
  std::vector<Index> full_strides_;
  RegisterLayout sub_;
};

class SparseState {
 public:
  static constexpr double kDropThreshold = 1e-14;
  using Map = absl::flat_hash_map<Index, cplx>;

  SparseState() = default;
  explicit SparseState(RegisterLayout layout) : layout_(std::move(layout)) {}
  static SparseState basis(const RegisterLayout& layout, Index index);
  static SparseState from_digits(const RegisterLayout& layout, const std::vector<Index>& digits);
  static SparseState from_dense(const RegisterLayout& layout, const Vector& v);

  const RegisterLayout& layout() const { return layout_; }
  const Map& amplitudes() const { return amps_; }
  std::size_t support_size() const { return amps_.size(); }

  void add(Index index, cplx amplitude);
  void set(Index index, cplx amplitude);
  cplx amplitude(Index index) const;
  void prune(double threshold = kDropThreshold);
  void reserve(std::size_t n) { amps_.reserve(n); }

  double norm() const;
  double norm_squared() const;
  cplx inner(const SparseState& other) const;  // <this|other>
  SparseState normalized() const;
  Vector to_dense() const;
  std::vector<std::pair<Index, cplx>> sorted_entries() const;

  SparseState& operator+=(const SparseState& other);
  SparseState& operator-=(const SparseState& other);
  SparseState& operator*=(cplx s);

  // Tensor product with a state on a disjoint layout (appended registers).
  SparseState tensor(const SparseState& other) const;

 private:
  RegisterLayout layout_;
  Map amps_;
};

SparseState operator+(SparseState a, const SparseState& b);
SparseState operator-(SparseState a, const SparseState& b);
SparseState operator*(cplx s, SparseState a);
double distance(const SparseState& a, const SparseState& b);

// Column action: given a basis index, emit (row index, amplitude) pairs.
using Emit = std::function<void(Index, cplx)>;
using ColumnAction = std::function<void(Index, const Emit&)>;
using StateMap = std::function<SparseState(const SparseState&)>;

class LinearOp {
 public:
  LinearOp() = default;
  LinearOp(RegisterLayout layout, StateMap forward, StateMap adjoint);

  static LinearOp from_columns(const RegisterLayout& layout, ColumnAction forward, ColumnAction adjoint);
  // Hermitian operator given by one column action.
  static LinearOp hermitian(const RegisterLayout& layout, ColumnAction action);
  static LinearOp identity(const RegisterLayout& layout);
  static LinearOp zero(const RegisterLayout& layout);
  // Diagonal operator with real entries given by `value(index)`.
  static LinearOp diagonal(const RegisterLayout& layout, std::function<double(Index)> value);
  // Basis permutation index -> perm(index), with inverse.
  static LinearOp permutation(const RegisterLayout& layout, std::function<Index(Index)> perm,
                              std::function<Index(Index)> inverse);
  // Dense matrix acting on the whole (small) layout.
  static LinearOp dense(const RegisterLayout& layout, const Matrix& m);

  const RegisterLayout& layout() const { return layout_; }
  SparseState apply(const SparseState& s) const;
  SparseState apply_adjoint(const SparseState& s) const;
  SparseState operator()(const SparseState& s) const { return apply(s); }
  LinearOp adjoint() const { return LinearOp(layout_, adj_, fwd_); }

  // Dense matrix of the operator (small layouts only).
  Matrix to_dense() const;

 private:
  RegisterLayout layout_;
  StateMap fwd_;
  StateMap adj_;
};

LinearOp compose(const LinearOp& a, const LinearOp& b);  // a * b
LinearOp compose(const std::vector<LinearOp>& ops);      // ops[0] * ops[1] * ...
LinearOp operator+(const LinearOp& a, const LinearOp& b);
LinearOp operator-(const LinearOp& a, const LinearOp& b);
LinearOp scaled(const LinearOp& a, cplx s);

// op (on its own layout, whose registers correspond to `targets` in order)
// tensored with the identity on the remaining registers of `layout`.
LinearOp tensor_embed(const LinearOp& op, const std::vector<std::string>& targets, const RegisterLayout& layout);
// Dense matrix acting on the named registers of `layout` only.
LinearOp dense_on(const Matrix& m, const std::vector<std::string>& targets, const RegisterLayout& layout);
// Block operator: for each value c of the control registers, apply block(c)
// on the target registers. Blocks are given as operators on the target sub-layout.
LinearOp controlled(const std::vector<std::string>& controls, const std::vector<std::string>& targets,
                    const RegisterLayout& layout, std::function<const LinearOp&(Index)> block);

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(Matrix entries);
  static DensityMatrix pure(const Vector& v);
  static DensityMatrix zeros(Index dimension);

  Index dimension() const { return static_cast<Index>(m_.rows()); }
  const Matrix& entries() const { return m_; }
  Matrix& entries() { return m_; }
  cplx trace() const { return m_.trace(); }
  bool is_hermitian(double tol = 1e-10) const;

  DensityMatrix& operator+=(const DensityMatrix& other);
  DensityMatrix& operator*=(double s);

 private:
  Matrix m_;
};

DensityMatrix partial_trace(const SparseState& state, const std::vector<std::string>& keep);
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);
double restricted_norm(const SparseState& state, const LinearOp& size_projector);
std::vector<double> hermitian_eigenvalues(const Matrix& m);

// Largest singular value. Exact eigendecomposition of C^H C for at most 512
// columns, otherwise power iteration (200 iterations, relative tol 1e-8).
double operator_norm(const Matrix& m);
// Norm of `op` restricted to the span of the given basis columns.
double restricted_operator_norm(const LinearOp& op, const std::vector<Index>& columns);

// Parameters shared by the numeric helpers.
inline constexpr std::size_t kExactNormMaxDim = 512;
inline constexpr int kPowerIterations = 200;
inline constexpr double kPowerTolerance = 1e-8;

}  // namespace qperm
