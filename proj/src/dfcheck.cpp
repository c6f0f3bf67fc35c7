#include "ske/dfcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ske/gates.hpp"

namespace ske::dfcheck {

namespace {

Complex boundary_g(const std::vector<Complex>& g, long k) {
  if (k < 0 || k >= static_cast<long>(g.size())) return Complex(0.0, 0.0);
  return g[static_cast<std::size_t>(k)];
}

Complex bracket_term(const std::vector<Complex>& g, const std::vector<double>& n, std::size_t k) {
  const Complex a = boundary_g(g, static_cast<long>(k)) *
                    std::conj(boundary_g(g, static_cast<long>(k) + 1)) * (n[k] + 1.0);
  const Complex b = boundary_g(g, static_cast<long>(k) - 1) *
                    std::conj(boundary_g(g, static_cast<long>(k))) * n[k];
  return a + b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Triangulation
// ---------------------------------------------------------------------------

TriangularBlock triangulate_block(double omega, Complex g, int n, Branch branch,
                                  const Tolerances& tol) {
  if (std::abs(std::imag(g)) > 1e-14 * std::max(1.0, std::abs(g)))
    throw ValidationError(
        "triangulation supports real couplings only; the closed-form transform "
        "carries no conjugations");
  const double gr = std::real(g);
  if (gr == 0.0) throw ValidationError("triangulation requires a nonzero coupling");
  if (n < 0) throw ValidationError("occupation must be non-negative");
  if (!(omega > 0.0)) {
    std::ostringstream msg;
    msg << "triangulation transform is singular at omega = " << omega
        << " (zeta - gamma = omega sqrt(n+1)/g vanishes, det T = 0)";
    throw SingularError(msg.str());
  }

  TriangularBlock block;
  block.omega = omega;
  block.g = gr;
  block.n = n;

  const double root_n1 = std::sqrt(static_cast<double>(n) + 1.0);
  const double big_g = gr * root_n1;
  const double disc = std::sqrt((omega / (2.0 * gr)) * (omega / (2.0 * gr)) / (n + 1.0) + 1.0);
  const double base = -omega / (2.0 * gr * root_n1);
  block.gamma = (branch == Branch::Plus) ? base + disc : base - disc;
  block.zeta = (omega * root_n1 + block.gamma * gr) / gr;

  block.M << omega * n, big_g, big_g, omega * (n + 1.0);
  block.T << block.gamma, -1.0, 1.0, -block.zeta;

  // With b = -1, c = 1 the determinant is -gamma omega n / (g sqrt(n+1)),
  // which vanishes identically at n = 0: both columns collapse onto the same
  // eigenvector. Swap the second column for the other eigenvector direction
  // (-1, gamma), which keeps b = -1 and the annihilation intact.
  const double t_scale = block.T.squaredNorm();
  if (std::abs(block.T.determinant()) < tol.det_floor * std::max(1.0, t_scale)) {
    block.T(1, 1) = block.gamma;
    block.second_column_adjusted = true;
  }
  if (std::abs(block.T.determinant()) < tol.det_floor * std::max(1.0, block.T.squaredNorm()))
    throw SingularError("triangular transform is numerically singular");

  block.M_tri = block.T.inverse() * block.M * block.T;
  return block;
}

Complex bath_df_constraint(const std::vector<Complex>& g, const std::vector<double>& n) {
  if (g.size() != n.size())
    throw ValidationError("coupling and occupation lists must have equal length");
  Complex sum{0.0, 0.0};
  for (std::size_t k = 0; k < g.size(); ++k) sum += bracket_term(g, n, k);
  return sum;
}

BvCheck bv_condition(const std::vector<Complex>& g, const std::vector<double>& n, double tol) {
  if (g.size() != n.size())
    throw ValidationError("coupling and occupation lists must have equal length");
  BvCheck check;
  check.defined.resize(g.size());
  check.holds.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Complex denom = boundary_g(g, static_cast<long>(k)) *
                          std::conj(boundary_g(g, static_cast<long>(k) + 1));
    check.defined[k] = (n[k] != 0.0) && (std::abs(denom) > 0.0);
    const Complex bracket = bracket_term(g, n, k);
    double scale = std::max(1.0, std::abs(denom) * (n[k] + 1.0));
    check.holds[k] = std::abs(bracket) <= tol * scale;
  }
  return check;
}

// ---------------------------------------------------------------------------
// Hilbert-space residual
// ---------------------------------------------------------------------------

DFReport df_residual(const subdyn::Workspace& ws, const std::vector<subdyn::SubdynSet>& sets) {
  DFReport report;
  report.per_nu.resize(sets.size(), 0.0);
  double worst = 0.0;
  for (const auto& set : sets) {
    const StateVector phi = ws.basis().vector(set.index);
    const Complex value = (phi.adjoint() * ws.hams().coupling() * set.C * phi)(0);
    report.per_nu[set.index] = std::abs(value);
    worst = std::max(worst, std::abs(value));
  }
  // sum_nu P (lambda Hint) C P is diagonal in the unperturbed basis, so its
  // 2-norm is the largest per-label magnitude.
  report.residual_hilbert = worst;
  return report;
}

Order2Residual order2_df_residual(const model::ModelConfig& config,
                                  const std::vector<int>& occupations, int system_level) {
  config.validate();
  if (config.coupling != model::CouplingKind::Dephasing)
    throw ValidationError("the second-order closed form applies to the dephasing coupling");
  if (occupations.size() != config.mode_count())
    throw ValidationError("occupation list length does not match the mode count");

  Order2Residual out;
  if (system_level == 3 || system_level == 4) return out;  // coupling annihilates these

  const double lambda = config.lambda;
  std::vector<Complex> g(config.mode_count());
  std::vector<double> n(config.mode_count());
  double shift_sq = 0.0;
  double omega_mean = 0.0;
  for (std::size_t k = 0; k < config.mode_count(); ++k) {
    g[k] = config.modes[k].g;
    n[k] = occupations[k];
    const bool can_raise = occupations[k] < config.n_max;
    shift_sq += std::norm(config.modes[k].g) *
                ((can_raise ? occupations[k] + 1.0 : 0.0) + occupations[k]);
    omega_mean += config.modes[k].omega;
  }
  omega_mean /= static_cast<double>(config.mode_count());
  const double shift2 = 2.0 * lambda * std::sqrt(shift_sq);

  Complex per_mode{0.0, 0.0};
  Complex common{0.0, 0.0};
  for (std::size_t k = 0; k < config.mode_count(); ++k) {
    const Complex bracket = bracket_term(g, n, k);
    const double d_k = shift2 - config.modes[k].omega;
    const double d_bar = shift2 - omega_mean;
    if (std::abs(d_k) < 1e-12 || std::abs(d_bar) < 1e-12)
      throw SingularError("second-order denominator vanishes; shift matches a mode frequency");
    per_mode += bracket / d_k;
    common += bracket / d_bar;
  }
  out.per_mode = lambda * lambda * per_mode;
  out.common = lambda * lambda * common;
  return out;
}

// ---------------------------------------------------------------------------
// Liouville-space check
// ---------------------------------------------------------------------------

OperatorMatrix commutator_superoperator(const OperatorMatrix& h) {
  const OperatorMatrix id = OperatorMatrix::Identity(h.rows(), h.cols());
  return kron(id, h) - kron(h.transpose(), id);
}

namespace {

struct TriangularFrame {
  OperatorMatrix transform;          // D x D, phi (x) Fock representation
  OperatorMatrix transform_inverse;
  std::vector<double> free_energy;   // per triangular composite index
  // dominant Fock pattern of each column; dyads pair across system levels by
  // equal signature, since coupled and uncoupled blocks may order their
  // triangular columns differently
  std::vector<std::size_t> bath_signature;
};

// Per system level: tensor the per-mode 2x2 transforms; levels the coupling
// annihilates (and lambda = 0) keep the Fock frame.
TriangularFrame build_frame(const model::ModelConfig& config,
                            const model::UnperturbedBasis& basis, Branch branch,
                            const Tolerances& tol) {
  const std::size_t bath_dim = config.bath_dimension();
  const std::size_t dim = basis.dim;
  const double j_value = config.J.initial_value();

  // system coupling eigenvalue per level, from the operator itself
  const OperatorMatrix sz_sum =
      kron(model::pauli(model::SpinAxis::Z), OperatorMatrix::Identity(2, 2)) +
      kron(OperatorMatrix::Identity(2, 2), model::pauli(model::SpinAxis::Z));
  const OperatorMatrix phi_sys = model::system_eigenvectors();

  TriangularFrame frame;
  frame.transform = OperatorMatrix::Zero(static_cast<Eigen::Index>(dim),
                                         static_cast<Eigen::Index>(dim));
  frame.transform_inverse = frame.transform;
  frame.free_energy.assign(dim, 0.0);
  frame.bath_signature.assign(dim, 0);

  for (int j = 0; j < 4; ++j) {
    const double a_j = std::real((phi_sys.col(j).adjoint() * sz_sum * phi_sys.col(j))(0));
    OperatorMatrix t_bath = OperatorMatrix::Identity(1, 1);
    std::vector<std::array<double, 2>> mode_energy(config.mode_count());
    std::vector<std::array<std::size_t, 2>> mode_level(config.mode_count());
    for (std::size_t k = 0; k < config.mode_count(); ++k) {
      const double coupling = a_j * config.lambda * std::real(config.modes[k].g);
      OperatorMatrix t_mode = OperatorMatrix::Identity(2, 2);
      if (std::abs(coupling) > 0.0) {
        const TriangularBlock block =
            triangulate_block(config.modes[k].omega, Complex(coupling, 0.0), 0, branch, tol);
        t_mode = block.T.cast<Complex>();
      }
      // free bath energy follows the dominant Fock component of each column
      for (int col = 0; col < 2; ++col) {
        const bool upper_dominant = std::abs(t_mode(1, col)) >= std::abs(t_mode(0, col));
        mode_energy[k][static_cast<std::size_t>(col)] =
            upper_dominant ? config.modes[k].omega : 0.0;
        mode_level[k][static_cast<std::size_t>(col)] = upper_dominant ? 1 : 0;
      }
      t_bath = kron(t_bath, t_mode);
    }

    const std::size_t offset = static_cast<std::size_t>(j) * bath_dim;
    frame.transform.block(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(offset),
                          static_cast<Eigen::Index>(bath_dim),
                          static_cast<Eigen::Index>(bath_dim)) = t_bath;
    const OperatorMatrix t_bath_inv = t_bath.inverse();
    frame.transform_inverse.block(static_cast<Eigen::Index>(offset),
                                  static_cast<Eigen::Index>(offset),
                                  static_cast<Eigen::Index>(bath_dim),
                                  static_cast<Eigen::Index>(bath_dim)) = t_bath_inv;

    const double system_energy = (j == 3) ? -0.75 * j_value : 0.25 * j_value;
    for (std::size_t f = 0; f < bath_dim; ++f) {
      double bath_e = 0.0;
      std::size_t signature = 0;
      std::size_t rem = f;
      for (std::size_t k = config.mode_count(); k-- > 0;) {
        const std::size_t col = rem % 2;
        rem /= 2;
        bath_e += mode_energy[k][col];
        signature |= mode_level[k][col] << k;
      }
      frame.free_energy[offset + f] = system_energy + bath_e;
      frame.bath_signature[offset + f] = signature;
    }
  }
  return frame;
}

double strict_lower_norm(const OperatorMatrix& m, const std::vector<std::size_t>& order) {
  // order[i] = position in the triangular ordering; entries with
  // order[row] > order[col] must vanish
  double worst = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (order[static_cast<std::size_t>(r)] > order[static_cast<std::size_t>(c)])
        worst = std::max(worst, std::abs(m(r, c)));
  return worst;
}

OperatorMatrix partial_trace_bath(const OperatorMatrix& rho_rep, std::size_t bath_dim) {
  OperatorMatrix out = OperatorMatrix::Zero(4, 4);
  for (Eigen::Index a = 0; a < 4; ++a)
    for (Eigen::Index b = 0; b < 4; ++b)
      for (Eigen::Index f = 0; f < static_cast<Eigen::Index>(bath_dim); ++f)
        out(a, b) += rho_rep(a * static_cast<Eigen::Index>(bath_dim) + f,
                             b * static_cast<Eigen::Index>(bath_dim) + f);
  return out;
}

double hs_overlap(const OperatorMatrix& a, const OperatorMatrix& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::real((a.adjoint() * b).trace()) / (na * nb);
}

struct ProjectedEvolution {
  OperatorMatrix rho0_system;   // computational two-qubit basis
  OperatorMatrix rhot_system;
};

ProjectedEvolution evolve_projected(const model::ModelConfig& config, Branch branch,
                                    const OperatorMatrix& rho_system,
                                    const OperatorMatrix& rho_bath, double t,
                                    const Tolerances& tol) {
  const model::UnperturbedBasis basis = model::unperturbed_basis(config);
  const std::size_t dim = basis.dim;
  const std::size_t bath_dim = config.bath_dimension();
  const TriangularFrame frame = build_frame(config, basis, branch, tol);

  // density in the phi (x) Fock representation
  const OperatorMatrix phi_sys = model::system_eigenvectors();
  const OperatorMatrix rho_sys_rep = phi_sys.adjoint() * rho_system * phi_sys;
  const OperatorMatrix rho_rep = kron(rho_sys_rep, rho_bath);

  // dyad coefficients in the triangular frame
  const OperatorMatrix y0 = frame.transform_inverse * rho_rep * frame.transform;

  // keep system dyads tensored with matching bath triangular vectors; evolve
  // with free eigenvalue differences (bath parts cancel inside the kept set)
  OperatorMatrix y_kept0 = OperatorMatrix::Zero(y0.rows(), y0.cols());
  OperatorMatrix y_kept_t = y_kept0;
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) {
      if (frame.bath_signature[r] != frame.bath_signature[c]) continue;
      const Complex phase =
          std::exp(-kI * (frame.free_energy[r] - frame.free_energy[c]) * t);
      y_kept0(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          y0(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      y_kept_t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          phase * y0(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }

  const OperatorMatrix proj0 = frame.transform * y_kept0 * frame.transform_inverse;
  const OperatorMatrix projt = frame.transform * y_kept_t * frame.transform_inverse;

  ProjectedEvolution out;
  out.rho0_system = phi_sys * partial_trace_bath(proj0, bath_dim) * phi_sys.adjoint();
  out.rhot_system = phi_sys * partial_trace_bath(projt, bath_dim) * phi_sys.adjoint();
  return out;
}

}  // namespace

DFReport liouville_df(const model::ModelConfig& config, Branch branch, const Tolerances& tol) {
  config.validate();
  if (config.coupling != model::CouplingKind::Dephasing)
    throw ValidationError("the Liouville check targets the dephasing coupling");
  if (config.n_max != 1)
    throw ValidationError("the Liouville check uses single-excitation bath blocks (n_max = 1)");
  for (const auto& m : config.modes)
    if (std::abs(std::imag(m.g)) > 1e-14 * std::max(1.0, std::abs(m.g)))
      throw ValidationError("the Liouville check requires real couplings");
  const std::size_t dim = config.dimension();
  if (dim * dim > config.max_dim) {
    std::ostringstream msg;
    msg << "Liouville dimension " << dim * dim << " exceeds the capacity cap " << config.max_dim;
    throw CapacityError(msg.str());
  }

  const model::Hamiltonians hams = model::build_hamiltonians(config);
  const model::UnperturbedBasis basis = model::unperturbed_basis(config);
  const TriangularFrame frame = build_frame(config, basis, branch, tol);

  const OperatorMatrix h_rep = basis.vectors.adjoint() * hams.h_total * basis.vectors;
  const OperatorMatrix u = frame.transform_inverse * h_rep * frame.transform;

  DFReport report;

  // triangularity of the transformed Liouvillian under the dyad ordering
  // (column-major descending, row ascending)
  const OperatorMatrix id = OperatorMatrix::Identity(static_cast<Eigen::Index>(dim),
                                                     static_cast<Eigen::Index>(dim));
  const OperatorMatrix liouville_tri = kron(id, u) - kron(u.transpose(), id);
  std::vector<std::size_t> order(dim * dim, 0);
  {
    std::vector<std::size_t> flat(dim * dim);
    std::iota(flat.begin(), flat.end(), 0);
    std::sort(flat.begin(), flat.end(), [dim](std::size_t x, std::size_t y) {
      const std::size_t cx = x / dim, rx = x % dim;
      const std::size_t cy = y / dim, ry = y % dim;
      if (cx != cy) return cx > cy;
      return rx < ry;
    });
    for (std::size_t pos = 0; pos < flat.size(); ++pos) order[flat[pos]] = pos;
  }
  report.liouville_lower_norm =
      strict_lower_norm(liouville_tri, order) / std::max(1.0, liouville_tri.norm());

  // second-order contraction: off-diagonal round trips through the dyad basis
  const std::size_t ldim = dim * dim;
  std::vector<double> l_free(ldim, 0.0);
  for (std::size_t f = 0; f < ldim; ++f)
    l_free[f] = frame.free_energy[f % dim] - frame.free_energy[f / dim];
  double worst = 0.0;
  for (std::size_t nu = 0; nu < ldim; ++nu) {
    Complex acc{0.0, 0.0};
    double degenerate_acc = 0.0;
    for (std::size_t mu = 0; mu < ldim; ++mu) {
      if (mu == nu) continue;
      const Complex product = liouville_tri(static_cast<Eigen::Index>(nu),
                                            static_cast<Eigen::Index>(mu)) *
                              liouville_tri(static_cast<Eigen::Index>(mu),
                                            static_cast<Eigen::Index>(nu));
      if (product == Complex(0.0, 0.0)) continue;
      const double gap = l_free[nu] - l_free[mu];
      if (std::abs(gap) > tol.degeneracy_gap)
        acc += product / gap;
      else
        degenerate_acc += std::abs(product);
    }
    worst = std::max(worst, std::abs(acc) + degenerate_acc);
  }
  report.residual_liouville = worst;

  // projected evolution over the swap duration: the paper's triplet-sector
  // probe state against a mixed bath
  const double tau_s = gates::swap_duration(config.J);
  OperatorMatrix rho_system = OperatorMatrix::Zero(4, 4);
  {
    const OperatorMatrix phi_sys = model::system_eigenvectors();
    StateVector chi = (1.0 / std::sqrt(2.0)) * phi_sys.col(2) - 0.5 * phi_sys.col(0) -
                      0.5 * phi_sys.col(1);
    rho_system = chi * chi.adjoint();
  }
  OperatorMatrix rho_bath = OperatorMatrix::Identity(1, 1);
  for (std::size_t k = 0; k < config.mode_count(); ++k) {
    OperatorMatrix mode_state = OperatorMatrix::Zero(2, 2);
    mode_state(0, 0) = 0.7;
    mode_state(1, 1) = 0.3;
    rho_bath = kron(rho_bath, mode_state);
  }

  const OperatorMatrix u_swap = gates::ideal_swap_system();
  double swap_residual = 0.0;
  double state_residual = 0.0;
  double fid = 1.0;
  for (const double lam : {0.0, config.lambda}) {
    model::ModelConfig probe = config;
    probe.lambda = lam;
    const ProjectedEvolution ev =
        evolve_projected(probe, branch, rho_system, rho_bath, tau_s, tol);
    swap_residual = std::max(
        swap_residual, (ev.rhot_system - u_swap * ev.rho0_system * u_swap.adjoint()).norm());
    state_residual = std::max(state_residual, (ev.rhot_system - ev.rho0_system).norm());
    if (lam == config.lambda) fid = hs_overlap(ev.rho0_system, ev.rhot_system);
  }
  report.swap_invariance = swap_residual;
  report.state_invariance = state_residual;
  report.fidelity = fid;
  return report;
}

}  // namespace ske::dfcheck
