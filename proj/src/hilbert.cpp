#include "photodet/hilbert.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

namespace photodet {

HilbertSpace::HilbertSpace(std::vector<SubsystemSpec> subsystems)
    : subsystems_(std::move(subsystems)) {
  if (subsystems_.empty())
    throw std::invalid_argument("HilbertSpace: needs at least one subsystem");
  std::set<std::string> seen;
  total_dim_ = 1;
  for (const auto& s : subsystems_) {
    if (s.dim < 2)
      throw std::invalid_argument("HilbertSpace: subsystem '" + s.label +
                                  "' has dim " + std::to_string(s.dim) +
                                  " < 2");
    if (!seen.insert(s.label).second)
      throw std::invalid_argument("HilbertSpace: duplicate label '" + s.label +
                                  "'");
    total_dim_ *= s.dim;
  }
}

int HilbertSpace::index_of(const std::string& label) const {
  for (int k = 0; k < static_cast<int>(subsystems_.size()); ++k)
    if (subsystems_[k].label == label) return k;
  throw std::invalid_argument("HilbertSpace: unknown subsystem label '" +
                              label + "'");
}

int HilbertSpace::dim_of(const std::string& label) const {
  return subsystems_[index_of(label)].dim;
}

int HilbertSpace::stride_of(int k) const {
  int stride = 1;
  for (int j = k + 1; j < static_cast<int>(subsystems_.size()); ++j)
    stride *= subsystems_[j].dim;
  return stride;
}

int HilbertSpace::basis_index(const std::vector<int>& levels) const {
  if (levels.size() != subsystems_.size())
    throw std::invalid_argument("basis_index: level count mismatch");
  int idx = 0;
  for (size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] < 0 || levels[k] >= subsystems_[k].dim)
      throw std::invalid_argument("basis_index: level out of range for '" +
                                  subsystems_[k].label + "'");
    idx = idx * subsystems_[k].dim + levels[k];
  }
  return idx;
}

bool HilbertSpace::operator==(const HilbertSpace& other) const {
  if (subsystems_.size() != other.subsystems_.size()) return false;
  for (size_t k = 0; k < subsystems_.size(); ++k)
    if (subsystems_[k].label != other.subsystems_[k].label ||
        subsystems_[k].dim != other.subsystems_[k].dim)
      return false;
  return true;
}

QuantumState QuantumState::pure(HilbertSpace space, VectorCx psi) {
  if (psi.size() != space.total_dim())
    throw std::invalid_argument("QuantumState::pure: dimension mismatch");
  QuantumState s;
  s.kind = Kind::Pure;
  s.space = std::move(space);
  s.psi = std::move(psi);
  return s;
}

QuantumState QuantumState::mixed(HilbertSpace space, MatrixCx rho) {
  if (rho.rows() != space.total_dim() || rho.cols() != space.total_dim())
    throw std::invalid_argument("QuantumState::mixed: dimension mismatch");
  QuantumState s;
  s.kind = Kind::Mixed;
  s.space = std::move(space);
  s.rho = std::move(rho);
  return s;
}

QuantumState QuantumState::basis_state(const HilbertSpace& space,
                                       const std::vector<int>& levels) {
  VectorCx psi = VectorCx::Zero(space.total_dim());
  psi(space.basis_index(levels)) = 1.0;
  return pure(space, std::move(psi));
}

QuantumState QuantumState::vacuum(const HilbertSpace& space) {
  return basis_state(space,
                     std::vector<int>(space.subsystems().size(), 0));
}

QuantumState QuantumState::to_mixed() const {
  if (kind == Kind::Mixed) return *this;
  return mixed(space, psi * psi.adjoint());
}

void QuantumState::normalize() {
  if (kind == Kind::Pure) {
    const double n = psi.norm();
    if (n > 0) psi /= n;
  } else {
    const Complex tr = rho.trace();
    if (std::abs(tr) > 0) rho /= tr;
  }
}

double QuantumState::validity_error() const {
  if (kind == Kind::Pure) return std::abs(psi.norm() - 1.0);
  const double tr_err = std::abs(rho.trace() - Complex(1.0, 0.0));
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  return std::max(tr_err, herm);
}

Operator annihilation_op(int dim) {
  if (dim < 2)
    throw std::invalid_argument("annihilation_op: dim must be >= 2, got " +
                                std::to_string(dim));
  SparseCx m(dim, dim);
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(dim - 1);
  for (int n = 1; n < dim; ++n)
    trips.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  m.setFromTriplets(trips.begin(), trips.end());
  return Operator{HilbertSpace({{"mode", dim}}), std::move(m)};
}

Operator number_op(int dim) {
  if (dim < 2) throw std::invalid_argument("number_op: dim must be >= 2");
  SparseCx m(dim, dim);
  std::vector<Eigen::Triplet<Complex>> trips;
  for (int n = 1; n < dim; ++n)
    trips.emplace_back(n, n, static_cast<double>(n));
  m.setFromTriplets(trips.begin(), trips.end());
  return Operator{HilbertSpace({{"mode", dim}}), std::move(m)};
}

Operator identity_op(const HilbertSpace& space) {
  SparseCx m(space.total_dim(), space.total_dim());
  m.setIdentity();
  return Operator{space, std::move(m)};
}

Operator top_level_projector(int dim) {
  if (dim < 2)
    throw std::invalid_argument("top_level_projector: dim must be >= 2");
  SparseCx m(dim, dim);
  m.insert(dim - 1, dim - 1) = 1.0;
  m.makeCompressed();
  return Operator{HilbertSpace({{"mode", dim}}), std::move(m)};
}

Operator embed(const Operator& op, const std::string& target,
               const HilbertSpace& space) {
  const int k = space.index_of(target);
  const int d = space.subsystems()[k].dim;
  if (op.mat.rows() != d || op.mat.cols() != d)
    throw std::invalid_argument("embed: operator dim " +
                                std::to_string(op.mat.rows()) +
                                " does not match subsystem '" + target +
                                "' dim " + std::to_string(d));
  const int post = space.stride_of(k);
  const int pre = space.total_dim() / (d * post);

  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(static_cast<size_t>(op.mat.nonZeros()) * pre * post);
  for (int c = 0; c < op.mat.outerSize(); ++c) {
    for (SparseCx::InnerIterator it(op.mat, c); it; ++it) {
      for (int p = 0; p < pre; ++p) {
        const int row_base = (p * d + static_cast<int>(it.row())) * post;
        const int col_base = (p * d + c) * post;
        for (int q = 0; q < post; ++q)
          trips.emplace_back(row_base + q, col_base + q, it.value());
      }
    }
  }
  SparseCx m(space.total_dim(), space.total_dim());
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return Operator{space, std::move(m)};
}

QuadraturePair quadratures(const Operator& a) {
  const SparseCx ad = SparseCx(a.mat.adjoint());
  SparseCx x = a.mat + ad;
  SparseCx y = Complex(0, -1) * (a.mat - ad);
  x.makeCompressed();
  y.makeCompressed();
  return {Operator{a.space, std::move(x)}, Operator{a.space, std::move(y)}};
}

Operator adjoint(const Operator& op) {
  return Operator{op.space, SparseCx(op.mat.adjoint())};
}

Complex expectation(const VectorCx& psi, const SparseCx& op) {
  if (psi.size() != op.cols())
    throw std::invalid_argument("expectation: shape mismatch");
  return psi.dot(op * psi);  // Eigen's dot conjugates the left argument
}

Complex expectation_trace(const MatrixCx& rho, const SparseCx& op) {
  if (rho.rows() != op.cols())
    throw std::invalid_argument("expectation: shape mismatch");
  // tr(O rho) = sum_{r,c} O(r,c) rho(c,r); iterate the sparse factor only.
  Complex acc = 0.0;
  for (int c = 0; c < op.outerSize(); ++c)
    for (SparseCx::InnerIterator it(op, c); it; ++it)
      acc += it.value() * rho(c, it.row());
  return acc;
}

Complex expectation(const QuantumState& state, const Operator& op) {
  if (state.kind == QuantumState::Kind::Pure)
    return expectation(state.psi, op.mat);
  return expectation_trace(state.rho, op.mat);
}

Operator operator+(const Operator& a, const Operator& b) {
  if (a.space != b.space)
    throw std::invalid_argument("Operator+: space mismatch");
  return Operator{a.space, SparseCx(a.mat + b.mat)};
}

Operator operator-(const Operator& a, const Operator& b) {
  if (a.space != b.space)
    throw std::invalid_argument("Operator-: space mismatch");
  return Operator{a.space, SparseCx(a.mat - b.mat)};
}

Operator operator*(const Operator& a, const Operator& b) {
  if (a.space != b.space)
    throw std::invalid_argument("Operator*: space mismatch");
  SparseCx m = (a.mat * b.mat).pruned();
  m.makeCompressed();
  return Operator{a.space, std::move(m)};
}

Operator operator*(Complex scalar, const Operator& a) {
  return Operator{a.space, SparseCx(scalar * a.mat)};
}

Operator operator*(double scalar, const Operator& a) {
  return Complex(scalar, 0.0) * a;
}

double hermiticity_defect(const SparseCx& mat) {
  SparseCx d = mat - SparseCx(mat.adjoint());
  double m = 0.0;
  for (int c = 0; c < d.outerSize(); ++c)
    for (SparseCx::InnerIterator it(d, c); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace photodet
