#include "ske/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ske::oracle {

namespace {

// Deterministic phase: rotate so the largest-magnitude component is real
// positive (first such component on ties).
void fix_phase(Eigen::Ref<StateVector> v) {
  Eigen::Index arg = 0;
  double best = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > best + 1e-15) {
      best = a;
      arg = i;
    }
  }
  if (best == 0.0) return;
  const Complex z = v(arg) / best;
  v /= z;
}

std::string cluster_description(const EigenSystem& es, int cluster_id) {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (int i : es.clusters[static_cast<std::size_t>(cluster_id)]) {
    if (!first) os << ", ";
    os << es.eigenvalues(i);
    first = false;
  }
  os << "}";
  return os.str();
}

}  // namespace

EigenSystem exact_eigensystem(const OperatorMatrix& h, const OperatorMatrix& basis_columns,
                              const Tolerances& tol) {
  if (!is_hermitian(h, 1e-10))
    throw ValidationError("exact_eigensystem requires a Hermitian matrix");

  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(h);
  if (solver.info() != Eigen::Success)
    throw SingularError("eigendecomposition failed to converge");

  EigenSystem es;
  es.eigenvalues = solver.eigenvalues();
  es.eigenvectors = solver.eigenvectors();
  const Eigen::Index dim = h.rows();
  for (Eigen::Index i = 0; i < dim; ++i) fix_phase(es.eigenvectors.col(i));

  // Group by gap; eigenvalues arrive sorted.
  es.cluster_of.assign(static_cast<std::size_t>(dim), 0);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (i == 0 || es.eigenvalues(i) - es.eigenvalues(i - 1) > tol.degeneracy_gap)
      es.clusters.push_back({});
    es.clusters.back().push_back(static_cast<int>(i));
    es.cluster_of[static_cast<std::size_t>(i)] = static_cast<int>(es.clusters.size()) - 1;
  }

  const Eigen::Index n_labels = basis_columns.cols();
  es.matched_vectors = OperatorMatrix::Zero(dim, n_labels);
  es.matching.assign(static_cast<std::size_t>(n_labels), -1);
  es.matched_values.assign(static_cast<std::size_t>(n_labels), 0.0);
  es.overlaps.assign(static_cast<std::size_t>(n_labels), 0.0);
  es.ambiguous.assign(static_cast<std::size_t>(n_labels), false);

  const OperatorMatrix overlap = es.eigenvectors.adjoint() * basis_columns;  // <v_i|phi_nu>

  // Members already matched within each cluster, for the orthogonalization.
  std::vector<std::vector<Eigen::Index>> taken(es.clusters.size());

  for (Eigen::Index nu = 0; nu < n_labels; ++nu) {
    // pick the cluster carrying the most weight of phi_nu
    int best_cluster = -1;
    double best_weight = -1.0;
    int best_member = -1;
    for (std::size_t c = 0; c < es.clusters.size(); ++c) {
      double w = 0.0;
      int member = es.clusters[c].front();
      double member_w = -1.0;
      for (int i : es.clusters[c]) {
        const double o = std::norm(overlap(i, nu));
        w += o;
        if (o > member_w) {
          member_w = o;
          member = i;
        }
      }
      if (w > best_weight) {
        best_weight = w;
        best_cluster = static_cast<int>(c);
        best_member = member;
      }
    }
    es.overlaps[static_cast<std::size_t>(nu)] = best_weight;
    es.matching[static_cast<std::size_t>(nu)] = best_member;
    if (best_weight <= tol.overlap_threshold) {
      es.ambiguous[static_cast<std::size_t>(nu)] = true;
      continue;
    }

    // Projection of phi_nu onto the cluster eigenspace: the in-cluster
    // eigenvector with maximal overlap. Orthogonalize against members the
    // same cluster already handed out so the matched family stays orthonormal.
    StateVector w = StateVector::Zero(dim);
    for (int i : es.clusters[static_cast<std::size_t>(best_cluster)])
      w += es.eigenvectors.col(i) * overlap(i, nu);
    for (Eigen::Index prev : taken[static_cast<std::size_t>(best_cluster)]) {
      const StateVector p = es.matched_vectors.col(prev);
      w -= p * (p.dot(w));
    }
    const double norm = w.norm();
    if (norm * norm <= tol.overlap_threshold * best_weight) {
      std::ostringstream msg;
      msg << "degenerate cluster " << cluster_description(es, best_cluster)
          << " cannot be matched injectively near label index " << nu;
      throw DegeneracyError(msg.str());
    }
    w /= norm;
    fix_phase(w);
    es.matched_vectors.col(nu) = w;
    es.matched_values[static_cast<std::size_t>(nu)] = std::real(w.dot(h * w));
    taken[static_cast<std::size_t>(best_cluster)].push_back(nu);
  }
  return es;
}

OperatorMatrix exact_projector(const EigenSystem& es, std::size_t nu) {
  if (es.ambiguous[nu]) {
    const int member = es.matching[nu];
    const int cluster = member >= 0 ? es.cluster_of[static_cast<std::size_t>(member)] : 0;
    std::ostringstream msg;
    msg << "matching ambiguous for label index " << nu << "; degenerate cluster "
        << cluster_description(es, cluster);
    throw DegeneracyError(msg.str());
  }
  const StateVector v = es.matched(nu);
  return v * v.adjoint();
}

OperatorMatrix exact_oblique_projector(const EigenSystem& es, const model::UnperturbedBasis& basis,
                                       std::size_t nu) {
  if (es.ambiguous[nu]) throw DegeneracyError("matching ambiguous; oblique projector undefined");
  const StateVector v = es.matched(nu);
  const StateVector phi = basis.vector(nu);
  const Complex amp = phi.dot(v);  // <phi_nu|v>
  if (std::abs(amp) < 1e-12)
    throw SingularError("matched eigenvector has no component along its label");

  const StateVector qv = v - phi * amp;           // Q_nu v
  const StateVector c_col = qv / amp;             // C_nu phi_nu
  const Eigen::RowVectorXcd d_row = (qv / amp).adjoint();  // <phi_nu| D_nu on Q

  const OperatorMatrix p = phi * phi.adjoint();
  const OperatorMatrix c = c_col * phi.adjoint();
  const OperatorMatrix d = phi * d_row;
  const Complex s = 1.0 + (phi.adjoint() * d * c * phi)(0);
  if (std::abs(s) < 1e-12)
    throw SingularError("oblique projector normalization is not invertible");
  return (p + c) * (p + d) / s;
}

StateVector exact_propagate(const EigenSystem& es, const StateVector& state, double t) {
  const Eigen::VectorXcd phases =
      (-kI * t * es.eigenvalues.cast<Complex>().array()).exp().matrix();
  return es.eigenvectors * (phases.asDiagonal() * (es.eigenvectors.adjoint() * state));
}

StateVector exact_propagate(const OperatorMatrix& h, const StateVector& state, double t,
                            const Tolerances& tol) {
  const OperatorMatrix id = OperatorMatrix::Identity(h.rows(), h.cols());
  return exact_propagate(exact_eigensystem(h, id, tol), state, t);
}

OperatorMatrix exact_propagate_density(const EigenSystem& es, const OperatorMatrix& rho, double t) {
  const Eigen::VectorXcd phases =
      (-kI * t * es.eigenvalues.cast<Complex>().array()).exp().matrix();
  const OperatorMatrix u = es.eigenvectors * phases.asDiagonal() * es.eigenvectors.adjoint();
  return u * rho * u.adjoint();
}

}  // namespace ske::oracle
