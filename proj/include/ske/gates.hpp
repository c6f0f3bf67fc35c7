// gates.hpp — ideal swap and XOR gates, the coupling-time correction that
// cancels interaction-induced phase shifts, and corrected-gate verification

#pragma once

#include <optional>
#include <vector>

#include "ske/model.hpp"
#include "ske/types.hpp"

namespace ske::gates {

struct GateReport {
  double tau_s = 0.0;
  std::vector<double> delta_t;            // per nu
  std::optional<double> uniform_delta_t;  // withheld unless the shift ratio rule holds
  bool uniform_shift_violated = false;
  double residual = 0.0;                  // max phase-angle distance over nu
  std::vector<double> residual_per_nu;
  std::vector<Complex> phases;            // unit phases per system level j = 1..4
  std::vector<double> eq_lhs;             // time-correction integrand evaluated at tau_s + dt
  double bath_phase_mismatch = 0.0;       // max |sum_k omega_k n_k * delta_t|
};

// Smallest positive duration with integral(J) = pi (mod 2pi); `branch` adds
// extra full turns. Throws when the profile never reaches the target.
double swap_duration(const model::JProfile& profile, int branch = 0);

// 4x4 swap in the computational two-qubit basis, spectral form:
// exp(-i pi/4) on the triplet levels, exp(+i 3pi/4) on the singlet.
OperatorMatrix ideal_swap_system();

// Composite version: swap on the system factor together with the free bath
// phase accumulated over tau_s.
OperatorMatrix ideal_swap_composite(const model::ModelConfig& config, double tau_s);

OperatorMatrix swap_sqrt();  // principal root: phase arguments halved in (-pi, pi]

// exp(i pi/2 S1z) exp(-i pi/2 S2z) U_sw^(1/2) exp(i pi S1z) U_sw^(1/2)
OperatorMatrix xor_gate();

// Conditional-pattern probe of a two-qubit gate: requires |entries|^2 to be a
// permutation and returns the entangling phase invariant of the induced
// permutation-phase form (-1 for a conditional phase flip).
struct ConditionalPattern {
  bool permutation = false;
  Complex invariant{0.0, 0.0};
};
ConditionalPattern conditional_pattern(const OperatorMatrix& gate, double tol = 1e-9);

// Per-nu coupling-time correction dt = -tau_s / (J/(4 dE) + 1) for the triplet
// levels and dt = -tau_s / (-3J/(4 dE) + 1) for the singlet; the uniform value
// is only declared when dE_singlet = -3 dE_triplet holds within tolerance.
GateReport delta_t_correction(const model::ModelConfig& config,
                              const model::UnperturbedBasis& basis,
                              const std::vector<Complex>& shifts,
                              const Tolerances& tol = Tolerances::defaults());

// Builds the corrected swap from the intermediate-operator phases at
// tau_s + delta_t and compares with the ideal gate; each side is stripped of
// its own free bath phase, and the leftover bath mismatch omega.n * delta_t is
// reported separately.
GateReport corrected_swap(const model::ModelConfig& config,
                          const model::UnperturbedBasis& basis,
                          const std::vector<Complex>& shifts, double delta_t,
                          const Tolerances& tol = Tolerances::defaults());

}  // namespace ske::gates
