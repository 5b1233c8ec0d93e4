#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <string>
#include <vector>

namespace photodet {

using Complex  = std::complex<double>;
using SparseCx = Eigen::SparseMatrix<Complex>;
using VectorCx = Eigen::VectorXcd;
using MatrixCx = Eigen::MatrixXcd;
using VectorRe = Eigen::VectorXd;

/// One tensor factor of a composite Hilbert space.
struct SubsystemSpec {
  std::string label;
  int dim = 2;  // truncation dimension, >= 2
};

/// Ordered tensor product of truncated subsystems. The ordering is fixed at
/// construction and defines the flat index layout: the last subsystem varies
/// fastest.
class HilbertSpace {
public:
  HilbertSpace() = default;
  explicit HilbertSpace(std::vector<SubsystemSpec> subsystems);

  const std::vector<SubsystemSpec>& subsystems() const { return subsystems_; }
  int total_dim() const { return total_dim_; }

  int index_of(const std::string& label) const;  // throws on unknown label
  int dim_of(const std::string& label) const;

  /// Flat-index stride of subsystem k (product of dims after k).
  int stride_of(int k) const;

  /// Flat index of a product basis state given one level per subsystem.
  int basis_index(const std::vector<int>& levels) const;

  bool operator==(const HilbertSpace& other) const;
  bool operator!=(const HilbertSpace& other) const { return !(*this == other); }

private:
  std::vector<SubsystemSpec> subsystems_;
  int total_dim_ = 0;
};

/// Complex linear operator on a HilbertSpace, stored sparse.
struct Operator {
  HilbertSpace space;
  SparseCx mat;

  MatrixCx dense() const { return MatrixCx(mat); }
};

/// Pure (state vector) or mixed (density matrix) state.
struct QuantumState {
  enum class Kind { Pure, Mixed };

  Kind kind = Kind::Pure;
  HilbertSpace space;
  VectorCx psi;  // used when kind == Pure
  MatrixCx rho;  // used when kind == Mixed

  static QuantumState pure(HilbertSpace space, VectorCx psi);
  static QuantumState mixed(HilbertSpace space, MatrixCx rho);
  /// Product basis state |n_0, n_1, ...> in the subsystem ordering.
  static QuantumState basis_state(const HilbertSpace& space,
                                  const std::vector<int>& levels);
  static QuantumState vacuum(const HilbertSpace& space);

  QuantumState to_mixed() const;
  void normalize();

  /// Max deviation from a valid normalized state: |norm-1| for pure,
  /// max(|tr-1|, hermiticity defect) for mixed.
  double validity_error() const;
};

/// Truncated single-mode lowering operator: M[n-1, n] = sqrt(n).
/// Returned on its own single-subsystem space with label "mode".
Operator annihilation_op(int dim);

/// Diagonal number operator a†a on a single mode.
Operator number_op(int dim);

Operator identity_op(const HilbertSpace& space);

/// Projector |dim-1><dim-1| onto the top truncation level of a single mode.
Operator top_level_projector(int dim);

/// Tensor a single-subsystem operator with identities on all other
/// subsystems of `space`, at the position of `target`.
Operator embed(const Operator& op, const std::string& target,
               const HilbertSpace& space);

struct QuadraturePair {
  Operator x;  // a + a†
  Operator y;  // -i (a - a†)
};
QuadraturePair quadratures(const Operator& a);

Operator adjoint(const Operator& op);

Complex expectation(const QuantumState& state, const Operator& op);

// Hot-path overloads used by the integrators.
Complex expectation(const VectorCx& psi, const SparseCx& op);
Complex expectation_trace(const MatrixCx& rho, const SparseCx& op);

Operator operator+(const Operator& a, const Operator& b);
Operator operator-(const Operator& a, const Operator& b);
Operator operator*(const Operator& a, const Operator& b);
Operator operator*(Complex scalar, const Operator& a);
Operator operator*(double scalar, const Operator& a);

/// Largest absolute entry of A - A†; zero for Hermitian operators.
double hermiticity_defect(const SparseCx& mat);

}  // namespace photodet
