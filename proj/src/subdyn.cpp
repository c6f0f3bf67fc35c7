#include "ske/subdyn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ske::subdyn {

namespace {

// Resolvent solve on the Q subspace: x = pinv(E I - H_QQ) rhs, with singular
// values below the relative cutoff dropped. Raises when the dropped/kept
// directions leave the equation inconsistent (a genuinely singular resolvent).
StateVector resolvent_solve(const OperatorMatrix& h_rep, double e_nu, std::size_t nu,
                            const StateVector& rhs_q, const Tolerances& tol,
                            const std::string& label) {
  const Eigen::Index dim = h_rep.rows();
  const Eigen::Index qdim = dim - 1;
  OperatorMatrix m(qdim, qdim);
  Eigen::Index row = 0;
  for (Eigen::Index a = 0; a < dim; ++a) {
    if (a == static_cast<Eigen::Index>(nu)) continue;
    Eigen::Index col = 0;
    for (Eigen::Index b = 0; b < dim; ++b) {
      if (b == static_cast<Eigen::Index>(nu)) continue;
      m(row, col) = ((a == b) ? Complex(e_nu, 0.0) : Complex(0.0, 0.0)) - h_rep(a, b);
      ++col;
    }
    ++row;
  }

  Eigen::JacobiSVD<OperatorMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cutoff = tol.pinv_drop * (sv.size() > 0 ? sv(0) : 0.0);

  const Eigen::VectorXcd u_rhs = svd.matrixU().adjoint() * rhs_q;
  Eigen::VectorXcd scaled = Eigen::VectorXcd::Zero(sv.size());
  double dropped_gap = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) {
      scaled(i) = u_rhs(i) / sv(i);
    } else {
      dropped_gap = std::max(dropped_gap, sv(i));
    }
  }
  const StateVector x = svd.matrixV() * scaled;

  const double rhs_scale = std::max(1.0, rhs_q.norm());
  const double residual = (m * x - rhs_q).norm();
  if (residual > tol.resolvent_consistency * rhs_scale) {
    std::ostringstream msg;
    msg << "resolvent singular at nu=" << label << ", gap=" << dropped_gap
        << " (least-squares residual " << residual << ")";
    throw SingularError(msg.str());
  }
  return x;
}

StateVector embed_q(const StateVector& xq, std::size_t nu) {
  StateVector out = StateVector::Zero(xq.size() + 1);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (i == static_cast<Eigen::Index>(nu)) continue;
    out(i) = xq(k++);
  }
  return out;
}

StateVector strip_q(const Eigen::VectorXcd& full, std::size_t nu) {
  StateVector out(full.size() - 1);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < full.size(); ++i) {
    if (i == static_cast<Eigen::Index>(nu)) continue;
    out(k++) = full(i);
  }
  return out;
}

double matched_total_energy(const oracle::EigenSystem& es, std::size_t nu,
                            const model::CompositeIndex& label) {
  if (es.ambiguous[nu]) {
    std::ostringstream msg;
    msg << "oracle matching ambiguous at nu=" << label.to_string();
    throw DegeneracyError(msg.str());
  }
  return es.value(nu);
}

}  // namespace

// ---------------------------------------------------------------------------
// Workspace
// ---------------------------------------------------------------------------

Workspace::Workspace(const model::Hamiltonians& hams, const model::UnperturbedBasis& basis,
                     const Tolerances& tol)
    : hams_(&hams), basis_(&basis), tol_(&tol) {
  h_rep_ = basis.vectors.adjoint() * hams.h_total * basis.vectors;
  v_rep_ = basis.vectors.adjoint() * hams.coupling() * basis.vectors;
}

bool Workspace::system_degenerate(std::size_t a, std::size_t b) const {
  const double ea = basis_->system_coeff[a] * basis_->j_value;
  const double eb = basis_->system_coeff[b] * basis_->j_value;
  return std::abs(ea - eb) < 1e-9 * std::max(1.0, std::abs(ea));
}

// ---------------------------------------------------------------------------
// Creation / destruction operators
// ---------------------------------------------------------------------------

namespace {

// First-order coefficients of C (column nu): degenerate-manifold elements ride
// on the self-consistent shift, the rest on unperturbed energy differences.
Eigen::VectorXcd order1_column(const Workspace& ws, std::size_t nu) {
  const auto& basis = ws.basis();
  const Eigen::Index dim = static_cast<Eigen::Index>(ws.dim());
  Eigen::VectorXcd col = Eigen::VectorXcd::Zero(dim);
  const int j = basis.labels[nu].j;
  if (j == 3 || j == 4) return col;

  const double shift2 = order2_shift(ws, nu);
  for (Eigen::Index mu = 0; mu < dim; ++mu) {
    if (mu == static_cast<Eigen::Index>(nu)) continue;
    const Complex element = ws.coupling_rep()(mu, static_cast<Eigen::Index>(nu));
    if (std::abs(element) == 0.0) continue;
    if (ws.system_degenerate(static_cast<std::size_t>(mu), nu)) {
      if (shift2 == 0.0) {
        std::ostringstream msg;
        msg << "vanishing self-consistent shift on the degenerate block at nu="
            << basis.labels[nu].to_string();
        throw SingularError(msg.str());
      }
      col(mu) = element / shift2;
    } else {
      const double gap = basis.energies[nu] - basis.energies[static_cast<std::size_t>(mu)];
      if (std::abs(gap) < 1e-12) {
        std::ostringstream msg;
        msg << "degenerate non-manifold pair at nu=" << basis.labels[nu].to_string()
            << ", gap=" << gap;
        throw SingularError(msg.str());
      }
      col(mu) = element / gap;
    }
  }
  return col;
}

}  // namespace

OperatorMatrix creation_operator(const Workspace& ws, std::size_t nu, Mode mode,
                                 const oracle::EigenSystem* es) {
  const auto& basis = ws.basis();
  const StateVector phi = basis.vector(nu);

  if (mode == Mode::Order1) {
    const Eigen::VectorXcd col = order1_column(ws, nu);
    return (basis.vectors * col) * phi.adjoint();
  }

  if (es == nullptr)
    throw ValidationError("exact-mode creation operator needs the oracle eigensystem");
  const double e_nu = matched_total_energy(*es, nu, basis.labels[nu]);
  const StateVector rhs = strip_q(ws.coupling_rep().col(static_cast<Eigen::Index>(nu)), nu);
  const StateVector xq =
      resolvent_solve(ws.h_rep(), e_nu, nu, rhs, ws.tol(), basis.labels[nu].to_string());
  const StateVector col = embed_q(xq, nu);
  return (basis.vectors * col) * phi.adjoint();
}

OperatorMatrix destruction_operator(const Workspace& ws, std::size_t nu, Mode mode,
                                    const oracle::EigenSystem* es) {
  const auto& basis = ws.basis();
  const StateVector phi = basis.vector(nu);

  if (mode == Mode::Order1) {
    // mirror of the creation column with the opposite sign on the
    // degenerate-manifold denominators
    const Eigen::Index dim = static_cast<Eigen::Index>(ws.dim());
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(dim);
    const int j = basis.labels[nu].j;
    if (j == 1 || j == 2) {
      const double shift2 = order2_shift(ws, nu);
      for (Eigen::Index mu = 0; mu < dim; ++mu) {
        if (mu == static_cast<Eigen::Index>(nu)) continue;
        const Complex element = ws.coupling_rep()(static_cast<Eigen::Index>(nu), mu);
        if (std::abs(element) == 0.0) continue;
        if (ws.system_degenerate(static_cast<std::size_t>(mu), nu)) {
          if (shift2 == 0.0)
            throw SingularError("vanishing self-consistent shift on the degenerate block");
          row(mu) = -element / shift2;
        } else {
          const double gap = basis.energies[nu] - basis.energies[static_cast<std::size_t>(mu)];
          row(mu) = element / gap;
        }
      }
    }
    return phi * (row * basis.vectors.adjoint());
  }

  if (es == nullptr)
    throw ValidationError("exact-mode destruction operator needs the oracle eigensystem");
  const double e_nu = matched_total_energy(*es, nu, basis.labels[nu]);
  // D = P V Q pinv(E - H_QQ): solve the adjoint system for the row.
  const Eigen::RowVectorXcd v_row = ws.coupling_rep().row(static_cast<Eigen::Index>(nu));
  const StateVector rhs = strip_q(v_row.adjoint(), nu);
  OperatorMatrix h_adj = ws.h_rep().adjoint();
  const StateVector yq = resolvent_solve(h_adj, e_nu, nu, rhs, ws.tol(),
                                         basis.labels[nu].to_string());
  const StateVector row_full = embed_q(yq, nu);
  return phi * (row_full.adjoint() * basis.vectors.adjoint());
}

Complex energy_shift(const Workspace& ws, std::size_t nu, const OperatorMatrix& c, Mode mode) {
  if (mode == Mode::Order1) return Complex(order2_shift(ws, nu), 0.0);
  const StateVector phi = ws.basis().vector(nu);
  return (phi.adjoint() * ws.hams().coupling() * c * phi)(0);
}

double order2_shift(const Workspace& ws, std::size_t nu) {
  const auto& basis = ws.basis();
  const int j = basis.labels[nu].j;
  if (j == 3 || j == 4) return 0.0;
  double sum = 0.0;
  for (std::size_t mu = 0; mu < ws.dim(); ++mu) {
    if (mu == nu || !ws.system_degenerate(mu, nu)) continue;
    sum += std::norm(ws.coupling_rep()(static_cast<Eigen::Index>(mu),
                                       static_cast<Eigen::Index>(nu)));
  }
  return std::sqrt(sum);
}

Complex order2_shift_prediction(const Workspace& ws, std::size_t nu) {
  const auto& basis = ws.basis();
  const double shift2 = order2_shift(ws, nu);
  Complex sum{0.0, 0.0};
  for (std::size_t mu = 0; mu < ws.dim(); ++mu) {
    if (mu == nu) continue;
    const double w =
        std::norm(ws.coupling_rep()(static_cast<Eigen::Index>(mu), static_cast<Eigen::Index>(nu)));
    if (w == 0.0) continue;
    const double denom = basis.energies[nu] - basis.energies[mu] + shift2;
    if (std::abs(denom) < 1e-12)
      throw SingularError("self-consistent denominator vanishes in the shift prediction");
    sum += w / denom;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Pi projector
// ---------------------------------------------------------------------------

OperatorMatrix pi_projector(const OperatorMatrix& p, const OperatorMatrix& c,
                            const OperatorMatrix& d, const Tolerances& tol) {
  const OperatorMatrix dc = d * c;
  const Complex s = Complex(1.0, 0.0) + dc.trace();  // rank-1 block: tr(P DC P)
  if (std::abs(s) < 1e-10)
    throw SingularError("projected normalization 1 + <DC> is not invertible");
  (void)tol;
  return (p + c) * (p + d) / s;
}

SubdynSet build_set(const Workspace& ws, std::size_t nu, Mode mode,
                    const oracle::EigenSystem* es) {
  SubdynSet set;
  set.nu = ws.basis().labels[nu];
  set.index = nu;
  set.order = mode;
  set.P = ws.basis().projector(nu);
  set.C = creation_operator(ws, nu, mode, es);
  set.D = destruction_operator(ws, nu, mode, es);
  if (mode == Mode::Exact) {
    set.Pi = pi_projector(set.P, set.C, set.D, ws.tol());
  } else {
    // The first-order pair gives <DC> = -1 exactly, so the middle inverse of
    // the projector formula does not exist at this order; use the expanded
    // second-order form (P + C)(P + D - DC) instead.
    set.Pi = (set.P + set.C) * (set.P + set.D - set.D * set.C);
  }
  set.delta_e = energy_shift(ws, nu, set.C, mode);
  set.normalization = std::real(Complex(1.0, 0.0) + (set.D * set.C).trace());
  set.shift_imag_warning = std::abs(std::imag(set.delta_e)) > ws.tol().shift_imag_warn;
  return set;
}

std::vector<SubdynSet> build_sets(const Workspace& ws, Mode mode, const oracle::EigenSystem* es) {
  std::vector<SubdynSet> sets;
  sets.reserve(ws.dim());
  for (std::size_t nu = 0; nu < ws.dim(); ++nu) sets.push_back(build_set(ws, nu, mode, es));
  return sets;
}

// ---------------------------------------------------------------------------
// Intermediate operator
// ---------------------------------------------------------------------------

ThetaOperator intermediate_operator(const Workspace& ws, const std::vector<SubdynSet>& sets) {
  ThetaOperator theta;
  theta.spectral.terms.reserve(sets.size());
  theta.eigenvalues.reserve(sets.size());
  OperatorMatrix c_total =
      OperatorMatrix::Zero(ws.hams().h_total.rows(), ws.hams().h_total.cols());
  for (const auto& set : sets) {
    const Complex value = Complex(ws.basis().energies[set.index], 0.0) + set.delta_e;
    theta.spectral.terms.push_back({value, set.P});
    theta.eigenvalues.push_back(value);
    c_total += set.C;
  }
  const auto split = model::split_by_basis(ws.hams().h_total, ws.basis().vectors, ws.tol());
  theta.raw = split.diagonal + split.offdiagonal * c_total;
  return theta;
}

// ---------------------------------------------------------------------------
// Projected states
// ---------------------------------------------------------------------------

ProjectedState project_state(const Workspace& ws, const StateVector& psi,
                             const std::vector<SubdynSet>& sets) {
  if (std::abs(psi.norm() - 1.0) > 1e-10)
    throw ValidationError("project_state expects a normalized state");
  ProjectedState state;
  state.coefficients = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(sets.size()));
  for (const auto& set : sets) {
    const StateVector phi = ws.basis().vector(set.index);
    const Complex s = Complex(1.0, 0.0) + (set.D * set.C).trace();
    if (std::abs(s) < 1e-10)
      throw SingularError("projected normalization 1 + <DC> is not invertible");
    const Complex raw = phi.dot(psi) + (phi.adjoint() * set.D * psi)(0);
    state.coefficients(static_cast<Eigen::Index>(set.index)) = raw / s;
  }
  return state;
}

StateVector reconstruct(const Workspace& ws, const ProjectedState& state,
                        const std::vector<SubdynSet>& sets) {
  StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(ws.dim()));
  for (const auto& set : sets) {
    const StateVector phi = ws.basis().vector(set.index);
    psi += state.coefficients(static_cast<Eigen::Index>(set.index)) * (phi + set.C * phi);
  }
  return psi;
}

ProjectedState propagate_projected(const ProjectedState& state, const ThetaOperator& theta,
                                   double t) {
  if (t < 0.0) throw ValidationError("propagation time must be non-negative");
  ProjectedState out = state;
  for (Eigen::Index nu = 0; nu < out.coefficients.size(); ++nu)
    out.coefficients(nu) *= std::exp(-kI * theta.eigenvalues[static_cast<std::size_t>(nu)] * t);
  return out;
}

ProjectedState propagate_projected(
    const ProjectedState& state,
    const std::vector<std::pair<const ThetaOperator*, double>>& segments) {
  ProjectedState out = state;
  for (const auto& [theta, dt] : segments) out = propagate_projected(out, *theta, dt);
  return out;
}

OperatorMatrix propagate_projected_density(const OperatorMatrix& rho_rep,
                                           const ThetaOperator& theta, double t) {
  OperatorMatrix out = rho_rep;
  for (Eigen::Index a = 0; a < out.rows(); ++a)
    for (Eigen::Index b = 0; b < out.cols(); ++b) {
      const Complex diff = theta.eigenvalues[static_cast<std::size_t>(a)] -
                           std::conj(theta.eigenvalues[static_cast<std::size_t>(b)]);
      out(a, b) *= std::exp(-kI * diff * t);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Reduced projected density
// ---------------------------------------------------------------------------

ReducedProjection reduced_projected_density(const Workspace& ws, const OperatorMatrix& rho,
                                            const std::vector<SubdynSet>& sets) {
  const Eigen::Index dim = static_cast<Eigen::Index>(ws.dim());
  if (rho.rows() != dim || rho.cols() != dim)
    throw ValidationError("density matrix dimension mismatch");

  OperatorMatrix projected = OperatorMatrix::Zero(dim, dim);
  for (const auto& set : sets) projected += set.P * set.Pi * rho;

  // Partial trace over the bath; composite ordering is system-major.
  const Eigen::Index bath = dim / 4;
  OperatorMatrix rho_phi = OperatorMatrix::Zero(4, 4);
  const OperatorMatrix in_rep = ws.basis().vectors.adjoint() * projected * ws.basis().vectors;
  for (Eigen::Index a = 0; a < 4; ++a)
    for (Eigen::Index b = 0; b < 4; ++b)
      for (Eigen::Index f = 0; f < bath; ++f) rho_phi(a, b) += in_rep(a * bath + f, b * bath + f);

  ReducedProjection out;
  const OperatorMatrix u_sys = model::system_eigenvectors();
  out.rho_system = u_sys * rho_phi * u_sys.adjoint();
  out.trace = std::real(out.rho_system.trace());
  out.trace_warning = !(out.trace > 1e-12);
  return out;
}

// ---------------------------------------------------------------------------
// Fidelity
// ---------------------------------------------------------------------------

namespace {

void require_state(const OperatorMatrix& rho, const Tolerances& tol, const char* arg) {
  if (!is_hermitian(rho, tol.hermiticity * 1e2)) {
    std::ostringstream msg;
    msg << "fidelity " << arg << " is not Hermitian";
    throw ValidationError(msg.str());
  }
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(rho);
  if (solver.eigenvalues().minCoeff() < -tol.state_negativity_error) {
    std::ostringstream msg;
    msg << "fidelity " << arg << " has eigenvalue " << solver.eigenvalues().minCoeff()
        << " below -" << tol.state_negativity_error;
    throw ValidationError(msg.str());
  }
}

}  // namespace

double fidelity(const OperatorMatrix& rho0, const OperatorMatrix& rho_t, const Tolerances& tol) {
  require_state(rho0, tol, "first argument");
  require_state(rho_t, tol, "second argument");

  const OperatorMatrix product = rho0 * rho_t;
  const OperatorMatrix sym = 0.5 * (product + product.adjoint());
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(sym);
  double f = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    double v = solver.eigenvalues()(i);
    if (v < -tol.state_negativity_error) {
      std::ostringstream msg;
      msg << "fidelity product eigenvalue " << v << " below -" << tol.state_negativity_error
          << "; arguments are too far from commuting states";
      throw ValidationError(msg.str());
    }
    if (v < 0.0) v = 0.0;
    f += std::sqrt(v);
  }
  return f;
}

}  // namespace ske::subdyn
