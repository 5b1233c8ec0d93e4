#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "photodet/hilbert.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>

using namespace photodet;

namespace {

Operator random_sparse_op(const HilbertSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int d = space.total_dim();
  std::vector<Eigen::Triplet<Complex>> trips;
  for (int k = 0; k < 3 * d; ++k) {
    const int r = static_cast<int>(rng() % d);
    const int c = static_cast<int>(rng() % d);
    trips.emplace_back(r, c, Complex(unit(rng), unit(rng)));
  }
  SparseCx m(d, d);
  m.setFromTriplets(trips.begin(), trips.end());
  return Operator{space, std::move(m)};
}

}  // namespace

TEST_CASE("annihilation operator entries") {
  const Operator a2 = annihilation_op(2);
  const MatrixCx m = a2.dense();
  CHECK(m(0, 1) == Complex(1.0));
  CHECK(m(0, 0) == Complex(0.0));
  CHECK(m(1, 0) == Complex(0.0));
  CHECK(m(1, 1) == Complex(0.0));

  const MatrixCx n3 = (adjoint(annihilation_op(3)) * annihilation_op(3)).dense();
  CHECK(std::abs(n3(0, 0)) == 0.0);
  CHECK(std::abs(n3(1, 1) - 1.0) < 1e-15);
  CHECK(std::abs(n3(2, 2) - 2.0) < 1e-14);
  CHECK(std::abs(n3(0, 1)) == 0.0);

  CHECK_THROWS_AS(annihilation_op(1), std::invalid_argument);
  CHECK_THROWS_AS(annihilation_op(0), std::invalid_argument);
}

TEST_CASE("canonical commutator holds below the truncation level") {
  const int dim = 10;
  const Operator a = annihilation_op(dim);
  const MatrixCx comm =
      (a * adjoint(a)).dense() - (adjoint(a) * a).dense();
  for (int n = 0; n < dim - 1; ++n)
    CHECK(std::abs(comm(n, n) - Complex(1.0)) < 1e-14);
  // Only the top level breaks it.
  CHECK(std::real(comm(dim - 1, dim - 1)) == doctest::Approx(1.0 - dim));
}

TEST_CASE("embedding: identity, commutation, trace multiplicativity") {
  const HilbertSpace space({{"C", 2}, {"B1", 2}, {"A", 4}});
  const Operator id_b = identity_op(HilbertSpace({{"mode", 2}}));
  const MatrixCx e = embed(id_b, "B1", space).dense();
  CHECK((e - MatrixCx::Identity(16, 16)).cwiseAbs().maxCoeff() == 0.0);

  const Operator a_emb = embed(annihilation_op(4), "A", space);
  const Operator b_emb = embed(annihilation_op(2), "B1", space);
  const MatrixCx commutator =
      (a_emb * b_emb).dense() - (b_emb * a_emb).dense();
  CHECK(commutator.cwiseAbs().maxCoeff() == 0.0);  // exact commutation

  const Operator n_a = number_op(4);
  const Complex tr_small = n_a.dense().trace();
  const Complex tr_emb = embed(n_a, "A", space).dense().trace();
  CHECK(std::abs(tr_emb - tr_small * 4.0) < 1e-12);  // product of other dims

  CHECK_THROWS_AS(embed(n_a, "nope", space), std::invalid_argument);
  CHECK_THROWS_AS(embed(number_op(3), "A", space), std::invalid_argument);
}

TEST_CASE("embedding preserves spectra with multiplicity") {
  const HilbertSpace space({{"C", 2}, {"A", 3}});
  const Operator op = number_op(3);
  Eigen::ComplexEigenSolver<MatrixCx> es(embed(op, "A", space).dense());
  std::vector<double> eig;
  for (int i = 0; i < 6; ++i) eig.push_back(std::real(es.eigenvalues()(i)));
  std::sort(eig.begin(), eig.end());
  const std::vector<double> expected = {0, 0, 1, 1, 2, 2};
  for (int i = 0; i < 6; ++i) CHECK(eig[i] == doctest::Approx(expected[i]).epsilon(1e-10));
}

TEST_CASE("quadratures on vacuum and coherent states") {
  const int dim = 15;
  const Operator a = annihilation_op(dim);
  const auto [x, y] = quadratures(a);
  CHECK(hermiticity_defect(x.mat) == 0.0);
  CHECK(hermiticity_defect(y.mat) == 0.0);

  const QuantumState vac = QuantumState::vacuum(a.space);
  CHECK(std::abs(expectation(vac, y)) < 1e-14);
  const Complex y2 = expectation(vac, y * y);
  CHECK(std::real(y2) == doctest::Approx(1.0).epsilon(1e-12));

  // Coherent amplitude i*beta displaces only the Y quadrature: <Y> = 2 beta.
  const double beta = 0.7;
  const QuantumState coh =
      QuantumState::pure(a.space, oracles::coherent_state(dim, Complex(0, beta)));
  CHECK(std::real(expectation(coh, y)) == doctest::Approx(2 * beta).epsilon(1e-9));
  CHECK(std::abs(std::real(expectation(coh, x))) < 1e-9);

  // Real amplitude 1 gives <X> = 2 up to truncation error.
  const QuantumState coh_x =
      QuantumState::pure(a.space, oracles::coherent_state(dim, 1.0));
  CHECK(std::real(expectation(coh_x, x)) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("expectation values on basis states") {
  const HilbertSpace space({{"C", 2}, {"B1", 2}, {"A", 5}});
  const Operator n_b = adjoint(embed(annihilation_op(2), "B1", space)) *
                       embed(annihilation_op(2), "B1", space);
  const Operator n_a = embed(number_op(5), "A", space);

  const QuantumState vac = QuantumState::vacuum(space);
  CHECK(std::abs(expectation(vac, n_a)) == 0.0);

  const QuantumState c_excited = QuantumState::basis_state(space, {1, 0, 0});
  CHECK(std::abs(expectation(c_excited, n_b)) == 0.0);

  CHECK_THROWS_AS(expectation(vac.psi, number_op(3).mat),
                  std::invalid_argument);
}

TEST_CASE("adjoint involution and product rule") {
  const HilbertSpace space({{"C", 3}, {"A", 4}});
  const Operator a = random_sparse_op(space, 11);
  const Operator b = random_sparse_op(space, 22);

  const MatrixCx twice = adjoint(adjoint(a)).dense();
  CHECK((twice - a.dense()).cwiseAbs().maxCoeff() == 0.0);

  const MatrixCx lhs = adjoint(a * b).dense();
  const MatrixCx rhs = (adjoint(b) * adjoint(a)).dense();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Hermitian observables give real expectations") {
  const HilbertSpace space({{"C", 2}, {"A", 6}});
  const auto [x, y] = quadratures(embed(annihilation_op(6), "A", space));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  VectorCx psi(space.total_dim());
  for (int i = 0; i < psi.size(); ++i) psi(i) = Complex(gauss(rng), gauss(rng));
  psi /= psi.norm();
  const QuantumState state = QuantumState::pure(space, psi);

  CHECK(std::abs(std::imag(expectation(state, x))) < 1e-8);
  CHECK(std::abs(std::imag(expectation(state, y))) < 1e-8);
  const QuantumState mixed = state.to_mixed();
  CHECK(std::abs(std::imag(expectation(mixed, x))) < 1e-8);
}

TEST_CASE("space and state validity") {
  CHECK_THROWS_AS(HilbertSpace({{"C", 2}, {"C", 3}}), std::invalid_argument);
  CHECK_THROWS_AS(HilbertSpace({{"C", 1}}), std::invalid_argument);

  const HilbertSpace space({{"C", 2}, {"B1", 2}, {"A", 3}});
  CHECK(space.total_dim() == 12);
  CHECK(space.stride_of(0) == 6);
  CHECK(space.stride_of(2) == 1);
  CHECK(space.basis_index({1, 0, 0}) == 6);
  CHECK(space.basis_index({0, 0, 2}) == 2);

  QuantumState s = QuantumState::vacuum(space);
  CHECK(s.validity_error() < 1e-15);
  s.psi *= 2.0;
  CHECK(s.validity_error() > 0.5);
  s.normalize();
  CHECK(s.validity_error() < 1e-9);

  QuantumState m = s.to_mixed();
  CHECK(m.validity_error() < 1e-9);
}
