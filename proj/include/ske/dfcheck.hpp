// dfcheck.hpp — decoherence-free conditions in Hilbert and Liouville space,
// the bath coupling constraint, and the 2x2 bath-block triangulation that
// builds a DF projected subspace

#pragma once

#include <optional>
#include <vector>

#include "ske/model.hpp"
#include "ske/subdyn.hpp"
#include "ske/types.hpp"

namespace ske::dfcheck {

enum class Branch { Plus, Minus };

// Similarity transform of the bath repeat-subspace block
//   M = [[omega n, g sqrt(n+1)], [g sqrt(n+1), omega (n+1)]]
// to upper-triangular form. gamma solves the lower-left annihilation
// condition (a^2 - c^2) g sqrt(n+1) + a c omega = 0 with a = gamma c.
struct TriangularBlock {
  double omega = 0.0;
  double g = 0.0;
  int n = 0;
  double gamma = 0.0;
  double zeta = 0.0;
  Eigen::Matrix2d T;      // columns: right triangular basis vectors
  Eigen::Matrix2d M;
  Eigen::Matrix2d M_tri;  // T^{-1} M T, numerically upper triangular
  bool second_column_adjusted = false;  // see triangulate_block
};

TriangularBlock triangulate_block(double omega, Complex g, int n, Branch branch = Branch::Plus,
                                  const Tolerances& tol = Tolerances::defaults());

// sum_k ( g_k g*_{k+1} (n_k + 1) + g_{k-1} g*_k n_k ) with g_0 = g_{K+1} = 0.
Complex bath_df_constraint(const std::vector<Complex>& g, const std::vector<double>& n);

// Per-k ratio form of the constraint: (n_k+1)/n_k = -g_{k-1} g*_k / (g_k g*_{k+1}).
struct BvCheck {
  std::vector<bool> defined;  // ratio form evaluable at k
  std::vector<bool> holds;    // bracket_k == 0 within tolerance
};
BvCheck bv_condition(const std::vector<Complex>& g, const std::vector<double>& n,
                     double tol = 1e-12);

struct DFReport {
  // Hilbert-space part
  double residual_hilbert = 0.0;          // |sum_nu P (lambda Hint) C P| (2-norm)
  std::vector<double> per_nu;             // per-label contributions
  Complex bath_constraint{0.0, 0.0};      // constraint sum at the probe occupations
  double order2_per_mode = 0.0;           // second-order residual, per-mode denominators
  double order2_common = 0.0;             // same with one shared denominator
  // Liouville-space part
  double residual_liouville = 0.0;        // max second-order contraction over dyads
  double liouville_lower_norm = 0.0;      // strict lower part of the transformed Liouvillian
  double fidelity = 0.0;                  // normalized overlap of projected state at 0 and tau_s
  double swap_invariance = 0.0;           // |rho_proj(tau_s) - U rho_proj(0) U^-1|
  double state_invariance = 0.0;          // |rho_proj(tau_s) - rho_proj(0)|
};

// Evaluates the Hilbert-space DF condition sum_nu P_nu (lambda Hint) C_nu P_nu
// on the supplied subdynamics sets, plus the dephasing-model second-order
// closed form whose vanishing is equivalent to the bath constraint.
DFReport df_residual(const subdyn::Workspace& ws, const std::vector<subdyn::SubdynSet>& sets);

// Second-order closed-form residual at one probe label (dephasing model):
// lambda^2 sum_k bracket_k / d_k with d_k = shift2 - omega_k, plus the
// common-denominator variant d = shift2 - mean(omega).
struct Order2Residual {
  Complex per_mode{0.0, 0.0};
  Complex common{0.0, 0.0};
};
Order2Residual order2_df_residual(const model::ModelConfig& config,
                                  const std::vector<int>& occupations, int system_level);

// Liouville-space DF check on a dephasing instance with n_max = 1: builds the
// commutator superoperator, the triangular dyad basis (per-mode 2x2 blocks
// tensored with system dyads), the second-order contraction residual, the
// free-eigenvalue propagation of the projected density and its fidelity, and
// the swap invariance before/after switching on the coupling.
DFReport liouville_df(const model::ModelConfig& config, Branch branch = Branch::Plus,
                      const Tolerances& tol = Tolerances::defaults());

// The commutator superoperator L[X] = [H, X] on column-stacked matrices.
OperatorMatrix commutator_superoperator(const OperatorMatrix& h);

}  // namespace ske::dfcheck
