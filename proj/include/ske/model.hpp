// model.hpp — two-qubit Heisenberg system coupled to a truncated bosonic bath:
// configuration, composite indexing, Hamiltonian assembly and the unperturbed
// eigenbasis

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ske/types.hpp"

namespace ske::model {

inline constexpr std::size_t kDefaultMaxDim = 4096;

// Exchange coupling J(t): a constant or a piecewise-constant profile.
// Everything downstream only ever needs segment values and running integrals.
class JProfile {
 public:
  struct Segment {
    double duration;
    double value;
  };

  static JProfile constant(double value) {
    JProfile p;
    p.constant_value_ = value;
    return p;
  }

  static JProfile piecewise(std::vector<Segment> segments);

  bool is_constant() const { return constant_value_.has_value(); }
  double initial_value() const;
  double constant_value() const;  // throws ValidationError unless constant
  const std::vector<Segment>& segments() const { return segments_; }

  // integral of J over [0, t]; t beyond the profile is a ValidationError
  // (constant profiles extend indefinitely).
  double integral(double t) const;
  double total_duration() const;  // +inf for constant profiles

 private:
  std::optional<double> constant_value_;
  std::vector<Segment> segments_;
};

enum class CouplingKind { Dephasing, CaldeiraLeggett };

enum class SpinAxis { X, Y, Z };

struct Mode {
  double omega = 0.0;
  Complex g{0.0, 0.0};
  // Caldeira-Leggett only: the spin and spin-component this oscillator
  // couples to. Each mode owns exactly one (spin, axis) pair.
  int spin = 1;
  SpinAxis axis = SpinAxis::Z;
};

struct ModelConfig {
  JProfile J = JProfile::constant(1.0);
  double lambda = 0.0;
  std::vector<Mode> modes;
  int n_max = 1;
  CouplingKind coupling = CouplingKind::Dephasing;
  std::size_t max_dim = kDefaultMaxDim;

  int fock_levels() const { return n_max + 1; }
  std::size_t mode_count() const { return modes.size(); }
  std::size_t bath_dimension() const;
  std::size_t dimension() const;  // 4 * (n_max+1)^K

  // Throws SchemaError / CapacityError on invalid content.
  void validate() const;
};

// Label of an unperturbed eigenstate: system level j in 1..4 plus one
// occupation per bath mode. Flat ordering is j-major, then mode-lexicographic
// with the first mode most significant.
struct CompositeIndex {
  int j = 1;
  std::vector<int> occupations;

  std::string to_string() const;
};

std::size_t flat_index(const CompositeIndex& nu, const ModelConfig& config);
CompositeIndex index_from_flat(std::size_t flat, const ModelConfig& config);

// ---------------------------------------------------------------------------
// Elementary operators
// ---------------------------------------------------------------------------

OperatorMatrix pauli(SpinAxis axis);      // sigma_z|0> = +|0>
OperatorMatrix spin_dot_spin();           // S1.S2 on the 4-dim system space
OperatorMatrix system_eigenvectors();     // columns phi_1..phi_4 (computational rep)
OperatorMatrix bosonic_lowering(int levels);
OperatorMatrix bosonic_number(int levels);

// ---------------------------------------------------------------------------
// Hamiltonians. h_int carries no lambda; the assembled total is
// h_system + h_bath + lambda * h_int.
// ---------------------------------------------------------------------------

struct Hamiltonians {
  OperatorMatrix h_system;
  OperatorMatrix h_bath;
  OperatorMatrix h_int;
  OperatorMatrix h_total;
  double j_value = 0.0;
  double lambda = 0.0;

  OperatorMatrix coupling() const { return lambda * h_int; }
};

Hamiltonians build_hamiltonians(const ModelConfig& config);
Hamiltonians build_hamiltonians(const ModelConfig& config, double j_value);

// ---------------------------------------------------------------------------
// Unperturbed eigenbasis phi_nu = phi_j (x) |n_1..n_K> with energies
// E0 = (1/4 - delta_{j4} 3/4) J + sum_k omega_k n_k.
// ---------------------------------------------------------------------------

struct UnperturbedBasis {
  std::size_t dim = 0;
  OperatorMatrix vectors;  // columns phi_nu, computational representation
  std::vector<CompositeIndex> labels;
  std::vector<double> energies;        // E0 at j_value
  std::vector<double> system_coeff;    // 1/4 or -3/4 per nu
  std::vector<double> bath_energy;     // sum_k omega_k n_k per nu
  double j_value = 0.0;

  StateVector vector(std::size_t nu) const { return vectors.col(static_cast<Eigen::Index>(nu)); }
  OperatorMatrix projector(std::size_t nu) const;     // P_nu, rank 1
  OperatorMatrix complement(std::size_t nu) const;    // Q_nu = I - P_nu
  SpectralDecomposition h0_decomposition() const;     // {(E0_nu, P_nu)}

  double energy_at(std::size_t nu, double j) const {
    return system_coeff[nu] * j + bath_energy[nu];
  }
};

UnperturbedBasis unperturbed_basis(const ModelConfig& config);

// Splits h into the part diagonal in the supplied orthonormal basis and the
// rest; diagonal + offdiagonal == h exactly.
struct SplitHamiltonian {
  OperatorMatrix diagonal;
  OperatorMatrix offdiagonal;
};

SplitHamiltonian split_by_basis(const OperatorMatrix& h, const OperatorMatrix& basis_columns,
                                const Tolerances& tol = Tolerances::defaults());

}  // namespace ske::model
