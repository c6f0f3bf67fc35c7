// types.hpp — dense complex operator carrier, spectral decompositions,
// tolerance table and the error taxonomy shared by every module

#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ske {

using Complex = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes: schema/validation -> 1,
// capacity -> 2, numerical singularity (incl. degeneracy) -> 3.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

class DegeneracyError : public SingularError {
 public:
  using SingularError::SingularError;
};

// ---------------------------------------------------------------------------
// Central tolerance table. Every report echoes this block so emitted numbers
// carry their acceptance thresholds with them.
// ---------------------------------------------------------------------------

struct Tolerances {
  double hermiticity = 1e-12;         // relative, scaled by max(1, |H|)
  double unitarity = 1e-12;
  double projector = 1e-12;
  double orthogonality = 1e-12;
  double basis = 1e-12;               // orthonormality of a supplied basis
  double pinv_drop = 1e-10;           // relative singular-value cutoff
  double resolvent_consistency = 1e-8;  // least-squares residual before erroring
  double degeneracy_gap = 1e-9;       // absolute gap grouping eigenvalues
  double overlap_threshold = 0.5;     // minimal overlap for unambiguous matching
  double oracle_projector = 1e-7;
  double oracle_eigenvalue = 1e-8;
  double pi_idempotence = 1e-9;
  double commutator = 1e-8;
  double fidelity = 1e-10;
  double shift_imag_warn = 1e-8;
  double uniform_shift = 1e-8;        // relative test of the shift ratio rule
  double phase_unit = 1e-12;
  double eq_time_correction = 1e-10;  // closed form vs. integral evaluation
  double corrected_swap = 1e-9;
  double triangular_lower = 1e-12;    // relative to |M|
  double triangular_eigen = 1e-10;
  double det_floor = 1e-12;           // relative to |T|^2
  double df_order2_scale = 1e-10;     // bound is df_order2_scale * lambda^2
  double state_negativity_clamp = 1e-12;
  double state_negativity_error = 1e-9;
  double liouville = 1e-10;

  static const Tolerances& defaults() {
    static const Tolerances t{};
    return t;
  }
};

// ---------------------------------------------------------------------------
// Matrix predicates and norms
// ---------------------------------------------------------------------------

inline double frob(const OperatorMatrix& m) { return m.norm(); }

// Largest singular value.
inline double operator_norm(const OperatorMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

inline bool is_hermitian(const OperatorMatrix& m, double tol) {
  return (m - m.adjoint()).norm() <= tol * std::max(1.0, m.norm());
}

inline bool is_unitary(const OperatorMatrix& m, double tol) {
  const OperatorMatrix id = OperatorMatrix::Identity(m.rows(), m.cols());
  return (m.adjoint() * m - id).norm() <= tol * std::max(1.0, m.norm());
}

inline bool is_idempotent(const OperatorMatrix& m, double tol) {
  return (m * m - m).norm() <= tol * std::max(1.0, m.norm());
}

inline bool is_projector(const OperatorMatrix& m, double tol) {
  return is_hermitian(m, tol) && is_idempotent(m, tol);
}

// ---------------------------------------------------------------------------
// Spectral decomposition: (eigenvalue, projector) pairs
// ---------------------------------------------------------------------------

struct SpectralTerm {
  Complex eigenvalue;
  OperatorMatrix projector;
};

struct SpectralDecomposition {
  std::vector<SpectralTerm> terms;

  OperatorMatrix assemble() const {
    if (terms.empty()) return OperatorMatrix();
    OperatorMatrix sum =
        OperatorMatrix::Zero(terms.front().projector.rows(), terms.front().projector.cols());
    for (const auto& t : terms) sum += t.eigenvalue * t.projector;
    return sum;
  }

  // Max |P_a P_b| over distinct pairs.
  double orthogonality_residual() const {
    double worst = 0.0;
    for (std::size_t a = 0; a < terms.size(); ++a)
      for (std::size_t b = a + 1; b < terms.size(); ++b)
        worst = std::max(worst, (terms[a].projector * terms[b].projector).norm());
    return worst;
  }

  // |sum_a P_a - I|; meaningful only for complete decompositions.
  double completeness_residual() const {
    if (terms.empty()) return 0.0;
    OperatorMatrix sum =
        OperatorMatrix::Zero(terms.front().projector.rows(), terms.front().projector.cols());
    for (const auto& t : terms) sum += t.projector;
    return (sum - OperatorMatrix::Identity(sum.rows(), sum.cols())).norm();
  }
};

// Kronecker product for dense complex matrices.
inline OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
  OperatorMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace ske
