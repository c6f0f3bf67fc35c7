// subdyn.hpp — subdynamics pipeline: creation/destruction correlation
// operators, oblique eigenprojectors, the intermediate operator and its
// energy shifts, projected-state propagation and fidelity

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ske/model.hpp"
#include "ske/oracle.hpp"
#include "ske/types.hpp"

namespace ske::subdyn {

enum class Mode { Exact, Order1 };

// Per-label bundle {P, C, D, Pi, delta_e}. C lives in Q x P support,
// D in P x Q; Pi = (P + C)(P + DC)^{-1}(P + D) with the middle inverse taken
// on the rank-1 P block (scalar s = 1 + <phi|DC|phi>).
struct SubdynSet {
  model::CompositeIndex nu;
  std::size_t index = 0;
  OperatorMatrix P;
  OperatorMatrix C;
  OperatorMatrix D;
  OperatorMatrix Pi;
  Complex delta_e{0.0, 0.0};
  double normalization = 1.0;  // s, real part (imaginary part is diagnostic)
  Mode order = Mode::Exact;
  bool shift_imag_warning = false;
};

// Shared per-instance data: everything is computed in the unperturbed
// representation (phi basis) once and mapped back to the carrier rep.
class Workspace {
 public:
  Workspace(const model::Hamiltonians& hams, const model::UnperturbedBasis& basis,
            const Tolerances& tol = Tolerances::defaults());

  const model::Hamiltonians& hams() const { return *hams_; }
  const model::UnperturbedBasis& basis() const { return *basis_; }
  const Tolerances& tol() const { return *tol_; }
  const OperatorMatrix& h_rep() const { return h_rep_; }          // phi rep of H
  const OperatorMatrix& coupling_rep() const { return v_rep_; }   // phi rep of lambda*H_int
  std::size_t dim() const { return basis_->dim; }

  bool system_degenerate(std::size_t a, std::size_t b) const;

 private:
  const model::Hamiltonians* hams_;
  const model::UnperturbedBasis* basis_;
  const Tolerances* tol_;
  OperatorMatrix h_rep_;
  OperatorMatrix v_rep_;
};

// --- individual operators -------------------------------------------------

OperatorMatrix creation_operator(const Workspace& ws, std::size_t nu, Mode mode,
                                 const oracle::EigenSystem* es = nullptr);
OperatorMatrix destruction_operator(const Workspace& ws, std::size_t nu, Mode mode,
                                    const oracle::EigenSystem* es = nullptr);
Complex energy_shift(const Workspace& ws, std::size_t nu, const OperatorMatrix& c, Mode mode);

// Self-consistent second-order shift sqrt(sum |coupling element|^2) over the
// system-degenerate manifold; zero for j = 3, 4.
double order2_shift(const Workspace& ws, std::size_t nu);

// Second-order shift evaluated with the self-consistent denominators
// E0_nu - E0_mu + order2_shift(nu); its distance to the exact shift decays
// one power of lambda faster than the raw order2 value.
Complex order2_shift_prediction(const Workspace& ws, std::size_t nu);

OperatorMatrix pi_projector(const OperatorMatrix& p, const OperatorMatrix& c,
                            const OperatorMatrix& d,
                            const Tolerances& tol = Tolerances::defaults());

SubdynSet build_set(const Workspace& ws, std::size_t nu, Mode mode,
                    const oracle::EigenSystem* es = nullptr);
std::vector<SubdynSet> build_sets(const Workspace& ws, Mode mode,
                                  const oracle::EigenSystem* es = nullptr);

// --- intermediate operator -------------------------------------------------

struct ThetaOperator {
  SpectralDecomposition spectral;  // {(E0_nu + dE_nu, P_nu)}
  OperatorMatrix raw;              // H0 + H1 C, for residual diagnostics
  std::vector<Complex> eigenvalues;

  OperatorMatrix assembled() const { return spectral.assemble(); }
};

ThetaOperator intermediate_operator(const Workspace& ws, const std::vector<SubdynSet>& sets);

// --- projected states -------------------------------------------------------

struct ProjectedState {
  Eigen::VectorXcd coefficients;  // over nu, phi representation
};

ProjectedState project_state(const Workspace& ws, const StateVector& psi,
                             const std::vector<SubdynSet>& sets);

// Reconstruct sum_nu (P_nu + C_nu) c_nu phi_nu in the carrier representation.
StateVector reconstruct(const Workspace& ws, const ProjectedState& state,
                        const std::vector<SubdynSet>& sets);

ProjectedState propagate_projected(const ProjectedState& state, const ThetaOperator& theta,
                                   double t);
ProjectedState propagate_projected(
    const ProjectedState& state,
    const std::vector<std::pair<const ThetaOperator*, double>>& segments);

// Density version, matrix in the phi representation: element (nu, mu) picks
// up exp(-i (theta_nu - conj(theta_mu)) t).
OperatorMatrix propagate_projected_density(const OperatorMatrix& rho_rep,
                                           const ThetaOperator& theta, double t);

// --- reduced projected density ----------------------------------------------

struct ReducedProjection {
  OperatorMatrix rho_system;  // 4x4, computational two-qubit basis
  double trace = 0.0;
  bool trace_warning = false;  // non-positive trace after projection
};

ReducedProjection reduced_projected_density(const Workspace& ws, const OperatorMatrix& rho,
                                            const std::vector<SubdynSet>& sets);

// Tr sqrt(rho0 rho_t) via the Hermitian symmetrization of the product.
double fidelity(const OperatorMatrix& rho0, const OperatorMatrix& rho_t,
                const Tolerances& tol = Tolerances::defaults());

}  // namespace ske::subdyn
