#include "ske/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ske::model {

namespace {

OperatorMatrix embed_mode_operator(const OperatorMatrix& op, std::size_t mode,
                                   std::size_t mode_count, int levels) {
  OperatorMatrix out = OperatorMatrix::Identity(1, 1);
  for (std::size_t k = 0; k < mode_count; ++k) {
    const OperatorMatrix factor =
        (k == mode) ? op : OperatorMatrix::Identity(levels, levels);
    out = kron(out, factor);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// JProfile
// ---------------------------------------------------------------------------

JProfile JProfile::piecewise(std::vector<Segment> segments) {
  if (segments.empty()) throw SchemaError("J profile needs at least one segment");
  for (const auto& s : segments)
    if (!(s.duration > 0.0)) throw SchemaError("J profile segment durations must be positive");
  if (segments.size() == 1) return constant(segments.front().value);
  JProfile p;
  p.segments_ = std::move(segments);
  return p;
}

double JProfile::initial_value() const {
  return constant_value_ ? *constant_value_ : segments_.front().value;
}

double JProfile::constant_value() const {
  if (!constant_value_) throw ValidationError("operation requires a constant J profile");
  return *constant_value_;
}

double JProfile::integral(double t) const {
  if (t < 0.0) throw ValidationError("J profile integral requested for negative time");
  if (constant_value_) return *constant_value_ * t;
  double acc = 0.0;
  double clock = 0.0;
  for (const auto& s : segments_) {
    if (t <= clock + s.duration) return acc + s.value * (t - clock);
    acc += s.value * s.duration;
    clock += s.duration;
  }
  throw ValidationError("J profile integral requested beyond the profile duration");
}

double JProfile::total_duration() const {
  if (constant_value_) return std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (const auto& s : segments_) total += s.duration;
  return total;
}

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

std::size_t ModelConfig::bath_dimension() const {
  std::size_t d = 1;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (d > max_dim) return d;  // avoid overflow; validate() reports properly
    d *= static_cast<std::size_t>(fock_levels());
  }
  return d;
}

std::size_t ModelConfig::dimension() const { return 4 * bath_dimension(); }

void ModelConfig::validate() const {
  if (modes.empty()) throw SchemaError("at least one bath mode is required");
  if (n_max < 1) throw SchemaError("n_max must be >= 1");
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (!(modes[k].omega > 0.0)) {
      std::ostringstream msg;
      msg << "mode " << k + 1 << " has omega <= 0; zero frequencies are rejected "
          << "(the bath-block triangulation is singular there)";
      throw SchemaError(msg.str());
    }
    if (coupling == CouplingKind::CaldeiraLeggett && (modes[k].spin < 1 || modes[k].spin > 2))
      throw SchemaError("mode spin must be 1 or 2");
  }
  // overflow-safe capacity check
  double d = 4.0;
  for (std::size_t k = 0; k < modes.size(); ++k) d *= fock_levels();
  if (d > static_cast<double>(max_dim)) {
    std::ostringstream msg;
    msg << "composite dimension " << d << " exceeds the capacity cap " << max_dim;
    throw CapacityError(msg.str());
  }
}

// ---------------------------------------------------------------------------
// CompositeIndex
// ---------------------------------------------------------------------------

std::string CompositeIndex::to_string() const {
  std::ostringstream os;
  os << "(" << j;
  for (int n : occupations) os << "," << n;
  os << ")";
  return os.str();
}

std::size_t flat_index(const CompositeIndex& nu, const ModelConfig& config) {
  if (nu.j < 1 || nu.j > 4) throw ValidationError("system level out of range 1..4");
  if (nu.occupations.size() != config.mode_count())
    throw ValidationError("occupation list length does not match the mode count");
  const int levels = config.fock_levels();
  std::size_t fock = 0;
  for (int n : nu.occupations) {
    if (n < 0 || n > config.n_max) throw ValidationError("occupation out of range 0..n_max");
    fock = fock * static_cast<std::size_t>(levels) + static_cast<std::size_t>(n);
  }
  return static_cast<std::size_t>(nu.j - 1) * config.bath_dimension() + fock;
}

CompositeIndex index_from_flat(std::size_t flat, const ModelConfig& config) {
  if (flat >= config.dimension()) throw ValidationError("flat index out of range");
  const std::size_t bath = config.bath_dimension();
  CompositeIndex nu;
  nu.j = static_cast<int>(flat / bath) + 1;
  std::size_t fock = flat % bath;
  const int levels = config.fock_levels();
  nu.occupations.assign(config.mode_count(), 0);
  for (std::size_t k = config.mode_count(); k-- > 0;) {
    nu.occupations[k] = static_cast<int>(fock % levels);
    fock /= levels;
  }
  return nu;
}

// ---------------------------------------------------------------------------
// Elementary operators
// ---------------------------------------------------------------------------

OperatorMatrix pauli(SpinAxis axis) {
  OperatorMatrix m = OperatorMatrix::Zero(2, 2);
  switch (axis) {
    case SpinAxis::X:
      m(0, 1) = 1.0;
      m(1, 0) = 1.0;
      break;
    case SpinAxis::Y:
      m(0, 1) = -kI;
      m(1, 0) = kI;
      break;
    case SpinAxis::Z:
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
      break;
  }
  return m;
}

OperatorMatrix spin_dot_spin() {
  const OperatorMatrix sx = 0.5 * pauli(SpinAxis::X);
  const OperatorMatrix sy = 0.5 * pauli(SpinAxis::Y);
  const OperatorMatrix sz = 0.5 * pauli(SpinAxis::Z);
  return kron(sx, sx) + kron(sy, sy) + kron(sz, sz);
}

OperatorMatrix system_eigenvectors() {
  // Computational ordering |q1 q2> -> index 2*q1 + q2.
  OperatorMatrix phi = OperatorMatrix::Zero(4, 4);
  const double r = 1.0 / std::sqrt(2.0);
  phi(3, 0) = 1.0;            // phi_1 = |11>
  phi(0, 1) = 1.0;            // phi_2 = |00>
  phi(1, 2) = r;              // phi_3 = (|01> + |10>)/sqrt(2)
  phi(2, 2) = r;
  phi(1, 3) = r;              // phi_4 = (|01> - |10>)/sqrt(2)
  phi(2, 3) = -r;
  return phi;
}

OperatorMatrix bosonic_lowering(int levels) {
  OperatorMatrix b = OperatorMatrix::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) b(n - 1, n) = std::sqrt(static_cast<double>(n));
  return b;
}

OperatorMatrix bosonic_number(int levels) {
  OperatorMatrix n = OperatorMatrix::Zero(levels, levels);
  for (int k = 0; k < levels; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

Hamiltonians build_hamiltonians(const ModelConfig& config) {
  return build_hamiltonians(config, config.J.initial_value());
}

Hamiltonians build_hamiltonians(const ModelConfig& config, double j_value) {
  config.validate();
  const std::size_t K = config.mode_count();
  const int levels = config.fock_levels();
  const std::size_t bath_dim = config.bath_dimension();
  const OperatorMatrix id_sys = OperatorMatrix::Identity(4, 4);
  const OperatorMatrix id_bath =
      OperatorMatrix::Identity(static_cast<Eigen::Index>(bath_dim), static_cast<Eigen::Index>(bath_dim));

  Hamiltonians h;
  h.j_value = j_value;
  h.lambda = config.lambda;
  h.h_system = j_value * kron(spin_dot_spin(), id_bath);

  OperatorMatrix bath = OperatorMatrix::Zero(id_bath.rows(), id_bath.cols());
  for (std::size_t k = 0; k < K; ++k)
    bath += config.modes[k].omega * embed_mode_operator(bosonic_number(levels), k, K, levels);
  h.h_bath = kron(id_sys, bath);

  OperatorMatrix interaction =
      OperatorMatrix::Zero(h.h_system.rows(), h.h_system.cols());
  if (config.coupling == CouplingKind::Dephasing) {
    // (sigma_z^1 + sigma_z^2) (x) sum_k (g_k b_k^+ + g_k^* b_k); raising out of
    // the top Fock level annihilates (hard truncation).
    const OperatorMatrix sz_sum =
        kron(pauli(SpinAxis::Z), OperatorMatrix::Identity(2, 2)) +
        kron(OperatorMatrix::Identity(2, 2), pauli(SpinAxis::Z));
    OperatorMatrix field = OperatorMatrix::Zero(id_bath.rows(), id_bath.cols());
    for (std::size_t k = 0; k < K; ++k) {
      const OperatorMatrix b = embed_mode_operator(bosonic_lowering(levels), k, K, levels);
      field += config.modes[k].g * b.adjoint() + std::conj(config.modes[k].g) * b;
    }
    interaction = kron(sz_sum, field);
  } else {
    // One oscillator per configured (spin, axis) pair, each coupled linearly.
    for (std::size_t k = 0; k < K; ++k) {
      const Mode& m = config.modes[k];
      OperatorMatrix spin_op =
          (m.spin == 1) ? kron(pauli(m.axis), OperatorMatrix::Identity(2, 2))
                        : kron(OperatorMatrix::Identity(2, 2), pauli(m.axis));
      const OperatorMatrix b = embed_mode_operator(bosonic_lowering(levels), k, K, levels);
      interaction += kron(spin_op, m.g * b.adjoint() + std::conj(m.g) * b);
    }
  }
  h.h_int = interaction;
  h.h_total = h.h_system + h.h_bath + config.lambda * h.h_int;
  return h;
}

// ---------------------------------------------------------------------------
// Unperturbed basis
// ---------------------------------------------------------------------------

OperatorMatrix UnperturbedBasis::projector(std::size_t nu) const {
  const StateVector v = vector(nu);
  return v * v.adjoint();
}

OperatorMatrix UnperturbedBasis::complement(std::size_t nu) const {
  return OperatorMatrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)) -
         projector(nu);
}

SpectralDecomposition UnperturbedBasis::h0_decomposition() const {
  SpectralDecomposition dec;
  dec.terms.reserve(dim);
  for (std::size_t nu = 0; nu < dim; ++nu)
    dec.terms.push_back({Complex(energies[nu], 0.0), projector(nu)});
  return dec;
}

UnperturbedBasis unperturbed_basis(const ModelConfig& config) {
  config.validate();
  UnperturbedBasis basis;
  basis.dim = config.dimension();
  basis.j_value = config.J.initial_value();
  const std::size_t bath_dim = config.bath_dimension();
  const OperatorMatrix id_bath =
      OperatorMatrix::Identity(static_cast<Eigen::Index>(bath_dim), static_cast<Eigen::Index>(bath_dim));
  basis.vectors = kron(system_eigenvectors(), id_bath);

  basis.labels.reserve(basis.dim);
  basis.energies.reserve(basis.dim);
  for (std::size_t f = 0; f < basis.dim; ++f) {
    CompositeIndex nu = index_from_flat(f, config);
    const double coeff = (nu.j == 4) ? -0.75 : 0.25;
    double bath_e = 0.0;
    for (std::size_t k = 0; k < config.mode_count(); ++k)
      bath_e += config.modes[k].omega * nu.occupations[k];
    basis.system_coeff.push_back(coeff);
    basis.bath_energy.push_back(bath_e);
    basis.energies.push_back(coeff * basis.j_value + bath_e);
    basis.labels.push_back(std::move(nu));
  }
  return basis;
}

SplitHamiltonian split_by_basis(const OperatorMatrix& h, const OperatorMatrix& basis_columns,
                                const Tolerances& tol) {
  const OperatorMatrix gram = basis_columns.adjoint() * basis_columns;
  const OperatorMatrix id = OperatorMatrix::Identity(gram.rows(), gram.cols());
  if ((gram - id).norm() > tol.basis * std::max(1.0, gram.norm()))
    throw ValidationError("split_by_basis requires an orthonormal, complete basis");
  if (basis_columns.rows() != basis_columns.cols() || h.rows() != basis_columns.rows())
    throw ValidationError("split_by_basis dimension mismatch");

  const OperatorMatrix h_rep = basis_columns.adjoint() * h * basis_columns;
  const OperatorMatrix diag_rep = h_rep.diagonal().asDiagonal();
  SplitHamiltonian split;
  split.diagonal = basis_columns * diag_rep * basis_columns.adjoint();
  split.offdiagonal = h - split.diagonal;
  return split;
}

}  // namespace ske::model
