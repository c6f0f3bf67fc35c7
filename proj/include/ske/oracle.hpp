// oracle.hpp — brute-force ground truth: dense eigendecomposition with
// cluster-aware matching to unperturbed labels, exact spectral projectors and
// exact unitary propagation

#pragma once

#include <vector>

#include "ske/model.hpp"
#include "ske/types.hpp"

namespace ske::oracle {

struct EigenSystem {
  Eigen::VectorXd eigenvalues;   // ascending
  OperatorMatrix eigenvectors;   // orthonormal columns, phase-fixed
  std::vector<std::vector<int>> clusters;  // indices grouped by gap
  std::vector<int> cluster_of;             // eigenvector index -> cluster id

  // Per unperturbed label nu: the matched eigenvector (projection of phi_nu
  // onto its best cluster eigenspace, orthonormalized within the cluster),
  // the representative solver index, the matched eigenvalue and the overlap
  // weight. ambiguous[nu] is set when the weight never clears the threshold.
  OperatorMatrix matched_vectors;
  std::vector<int> matching;
  std::vector<double> matched_values;
  std::vector<double> overlaps;
  std::vector<bool> ambiguous;

  double value(std::size_t nu) const { return matched_values[nu]; }
  StateVector matched(std::size_t nu) const {
    return matched_vectors.col(static_cast<Eigen::Index>(nu));
  }
};

// Full spectrum of a Hermitian H with matching against the basis columns.
EigenSystem exact_eigensystem(const OperatorMatrix& h, const OperatorMatrix& basis_columns,
                              const Tolerances& tol = Tolerances::defaults());

// Rank-1 orthogonal spectral projector for the eigenvector matched to nu.
OperatorMatrix exact_projector(const EigenSystem& es, std::size_t nu);

// The same projector assembled the oblique way, (P+C)(P+DC)^{-1}(P+D), from
// exact creation/destruction data; coincides with exact_projector for
// Hermitian H.
OperatorMatrix exact_oblique_projector(const EigenSystem& es, const model::UnperturbedBasis& basis,
                                       std::size_t nu);

StateVector exact_propagate(const EigenSystem& es, const StateVector& state, double t);
StateVector exact_propagate(const OperatorMatrix& h, const StateVector& state, double t,
                            const Tolerances& tol = Tolerances::defaults());
OperatorMatrix exact_propagate_density(const EigenSystem& es, const OperatorMatrix& rho, double t);

}  // namespace ske::oracle
