#include <doctest.h>

#include <cmath>
#include <vector>

#include "ske/model.hpp"
#include "ske/oracle.hpp"
#include "ske/rng.hpp"
#include "ske/subdyn.hpp"

using namespace ske;

namespace {

model::ModelConfig instance(double lambda, int n_max = 2) {
  model::ModelConfig config;
  config.J = model::JProfile::constant(1.0);
  config.lambda = lambda;
  config.modes = {{1.0, Complex(0.1, 0.0)}};
  config.n_max = n_max;
  return config;
}

struct Fixture {
  model::ModelConfig config;
  model::Hamiltonians hams;
  model::UnperturbedBasis basis;
  subdyn::Workspace ws;
  oracle::EigenSystem es;

  explicit Fixture(const model::ModelConfig& c)
      : config(c),
        hams(model::build_hamiltonians(c)),
        basis(model::unperturbed_basis(c)),
        ws(hams, basis),
        es(oracle::exact_eigensystem(hams.h_total, basis.vectors)) {}
};

}  // namespace

TEST_CASE("zero coupling collapses the pipeline") {
  Fixture f(instance(0.0, 1));
  for (const auto mode : {subdyn::Mode::Exact, subdyn::Mode::Order1}) {
    const auto sets = subdyn::build_sets(f.ws, mode, &f.es);
    for (const auto& set : sets) {
      CHECK(set.C.norm() < 1e-13);
      CHECK(set.D.norm() < 1e-13);
      CHECK((set.Pi - set.P).norm() < 1e-13);
      CHECK(std::abs(set.delta_e) < 1e-13);
    }
  }
}

TEST_CASE("support conditions hold in both modes") {
  Fixture f(instance(0.05));
  const OperatorMatrix id = OperatorMatrix::Identity(f.hams.h_total.rows(), f.hams.h_total.cols());
  for (const auto mode : {subdyn::Mode::Exact, subdyn::Mode::Order1}) {
    const auto sets = subdyn::build_sets(f.ws, mode, &f.es);
    for (const auto& set : sets) {
      const OperatorMatrix q = id - set.P;
      CHECK((set.C - q * set.C * set.P).norm() < 1e-12);
      CHECK((set.D - set.P * set.D * q).norm() < 1e-12);
    }
  }
}

TEST_CASE("first-order operators vanish on the uncoupled levels") {
  Fixture f(instance(0.05));
  for (std::size_t nu = 0; nu < f.basis.dim; ++nu) {
    if (f.basis.labels[nu].j < 3) continue;
    CHECK(subdyn::creation_operator(f.ws, nu, subdyn::Mode::Order1).norm() == 0.0);
    CHECK(subdyn::destruction_operator(f.ws, nu, subdyn::Mode::Order1).norm() == 0.0);
    CHECK(subdyn::order2_shift(f.ws, nu) == 0.0);
  }
}

TEST_CASE("self-consistent shift matches the closed form") {
  Fixture f(instance(0.05));
  const OperatorMatrix coupling_rep =
      f.basis.vectors.adjoint() * f.hams.coupling() * f.basis.vectors;
  for (std::size_t nu = 0; nu < f.basis.dim; ++nu) {
    const auto& label = f.basis.labels[nu];
    if (label.j >= 3) continue;
    const int n = label.occupations[0];
    const bool can_raise = n < f.config.n_max;
    const double expected = 2.0 * f.config.lambda * std::abs(f.config.modes[0].g) *
                            std::sqrt((can_raise ? n + 1.0 : 0.0) + n);
    CHECK(subdyn::order2_shift(f.ws, nu) == doctest::Approx(expected).epsilon(1e-12));

    // first-order destruction entries are -(coupling element) / shift
    const OperatorMatrix d = subdyn::destruction_operator(f.ws, nu, subdyn::Mode::Order1);
    const OperatorMatrix d_rep = f.basis.vectors.adjoint() * d * f.basis.vectors;
    for (std::size_t mu = 0; mu < f.basis.dim; ++mu) {
      if (mu == nu) continue;
      const Complex element = coupling_rep(static_cast<Eigen::Index>(nu),
                                           static_cast<Eigen::Index>(mu));
      const Complex entry = d_rep(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(mu));
      if (std::abs(element) > 0.0)
        CHECK(std::abs(entry - (-element / expected)) < 1e-12);
      else
        CHECK(std::abs(entry) < 1e-13);
    }

    // the generic shift formula reproduces the self-consistent value
    const OperatorMatrix c = subdyn::creation_operator(f.ws, nu, subdyn::Mode::Order1);
    const Complex shift = subdyn::energy_shift(f.ws, nu, c, subdyn::Mode::Exact);
    CHECK(std::abs(shift - Complex(expected, 0.0)) < 1e-12);
  }
}

TEST_CASE("exact mode reproduces the oracle") {
  Fixture f(instance(0.05));
  const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);

  for (const auto& set : sets) {
    const std::size_t nu = set.index;

    // destruction is the adjoint of creation for real eigenvalues
    CHECK((set.D - set.C.adjoint()).norm() < 1e-10);

    // shift equals the oracle eigenvalue displacement
    CHECK(std::abs(set.delta_e - Complex(f.es.value(nu) - f.basis.energies[nu], 0.0)) < 1e-8);

    // projector identities
    CHECK((set.Pi * set.Pi - set.Pi).norm() < 1e-9);
    CHECK((f.hams.h_total * set.Pi - set.Pi * f.hams.h_total).norm() < 1e-8);
    CHECK((set.Pi - oracle::exact_projector(f.es, nu)).norm() < 1e-7);

    // the creation operator rebuilds the complementary part of the oracle
    // projector: Q Pi = C P Pi
    const OperatorMatrix pi_oracle = oracle::exact_projector(f.es, nu);
    const OperatorMatrix id =
        OperatorMatrix::Identity(f.hams.h_total.rows(), f.hams.h_total.cols());
    const OperatorMatrix q = id - set.P;
    CHECK((q * pi_oracle - set.C * set.P * pi_oracle).norm() < 1e-8);
  }
}

TEST_CASE("projected normalization is singular at first order") {
  Fixture f(instance(0.05));
  std::size_t nu_coupled = 0;
  for (std::size_t nu = 0; nu < f.basis.dim; ++nu)
    if (f.basis.labels[nu].j == 1) {
      nu_coupled = nu;
      break;
    }
  const OperatorMatrix p = f.basis.projector(nu_coupled);
  const OperatorMatrix c = subdyn::creation_operator(f.ws, nu_coupled, subdyn::Mode::Order1);
  const OperatorMatrix d = subdyn::destruction_operator(f.ws, nu_coupled, subdyn::Mode::Order1);
  CHECK_THROWS_AS(subdyn::pi_projector(p, c, d), SingularError);

  // the expanded form used by build_set stays finite
  const auto set = subdyn::build_set(f.ws, nu_coupled, subdyn::Mode::Order1);
  CHECK(set.Pi.norm() > 0.0);

  // state projection hits the same non-invertible normalization
  const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Order1);
  const StateVector psi = f.basis.vector(nu_coupled);
  CHECK_THROWS_AS(subdyn::project_state(f.ws, psi, sets), SingularError);
}

TEST_CASE("pi projector limiting cases") {
  Fixture f(instance(0.05, 1));
  const OperatorMatrix p = f.basis.projector(0);
  const OperatorMatrix zero = OperatorMatrix::Zero(p.rows(), p.cols());
  CHECK((subdyn::pi_projector(p, zero, zero) - p).norm() == 0.0);
}

TEST_CASE("intermediate operator") {
  SUBCASE("zero coupling gives the free generator") {
    Fixture f(instance(0.0, 1));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    const auto theta = subdyn::intermediate_operator(f.ws, sets);
    CHECK((theta.raw - f.hams.h_system - f.hams.h_bath).norm() < 1e-12);
    for (std::size_t nu = 0; nu < f.basis.dim; ++nu)
      CHECK(std::abs(theta.eigenvalues[nu] - Complex(f.basis.energies[nu], 0.0)) < 1e-12);
  }

  SUBCASE("assembled eigenvector invariance and oracle eigenvalues") {
    Fixture f(instance(0.05));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    const auto theta = subdyn::intermediate_operator(f.ws, sets);
    const OperatorMatrix assembled = theta.assembled();
    for (const auto& set : sets) {
      CHECK((assembled * set.P - theta.eigenvalues[set.index] * set.P).norm() < 1e-8);
      CHECK(std::abs(theta.eigenvalues[set.index] - Complex(f.es.value(set.index), 0.0)) < 1e-8);
    }
  }
}

TEST_CASE("state projection") {
  SUBCASE("zero coupling projects onto plain amplitudes") {
    Fixture f(instance(0.0, 1));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(f.basis.dim));
    psi(0) = std::sqrt(0.5);
    psi(5) = Complex(0.0, std::sqrt(0.5));
    const auto projected = subdyn::project_state(f.ws, psi, sets);
    for (std::size_t nu = 0; nu < f.basis.dim; ++nu) {
      const Complex expected = f.basis.vector(nu).dot(psi);
      CHECK(std::abs(projected.coefficients(static_cast<Eigen::Index>(nu)) - expected) < 1e-13);
    }

    // a basis state projects onto a Kronecker delta
    const auto delta = subdyn::project_state(f.ws, f.basis.vector(3), sets);
    for (std::size_t nu = 0; nu < f.basis.dim; ++nu)
      CHECK(std::abs(delta.coefficients(static_cast<Eigen::Index>(nu)) -
                     Complex(nu == 3 ? 1.0 : 0.0, 0.0)) < 1e-13);
  }

  SUBCASE("reconstruction round trip on the exact instance") {
    Fixture f(instance(0.05));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    SplitMix64 rng(11);
    StateVector psi(static_cast<Eigen::Index>(f.basis.dim));
    for (Eigen::Index i = 0; i < psi.size(); ++i)
      psi(i) = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    psi.normalize();
    const auto projected = subdyn::project_state(f.ws, psi, sets);
    const StateVector rebuilt = subdyn::reconstruct(f.ws, projected, sets);
    CHECK((rebuilt - psi).norm() < 1e-8);
  }

  SUBCASE("unnormalized input rejected") {
    Fixture f(instance(0.0, 1));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    const StateVector doubled = 2.0 * f.basis.vector(0);
    CHECK_THROWS_AS(subdyn::project_state(f.ws, doubled, sets), ValidationError);
  }
}

TEST_CASE("projected propagation") {
  Fixture f(instance(0.05));
  const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
  const auto theta = subdyn::intermediate_operator(f.ws, sets);

  subdyn::ProjectedState state;
  state.coefficients = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(f.basis.dim));
  state.coefficients(0) = std::sqrt(0.3);
  state.coefficients(4) = std::sqrt(0.3);
  state.coefficients(9) = Complex(0.0, std::sqrt(0.4));

  SUBCASE("zero time is the identity") {
    const auto evolved = subdyn::propagate_projected(state, theta, 0.0);
    CHECK((evolved.coefficients - state.coefficients).norm() == 0.0);
  }

  SUBCASE("norm is preserved") {
    const auto evolved = subdyn::propagate_projected(state, theta, 4.2);
    CHECK(std::abs(evolved.coefficients.norm() - state.coefficients.norm()) < 1e-10);
  }

  SUBCASE("single component evolves by a pure phase") {
    subdyn::ProjectedState single;
    single.coefficients = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(f.basis.dim));
    single.coefficients(2) = 1.0;
    const auto evolved = subdyn::propagate_projected(single, theta, 1.5);
    CHECK(std::abs(std::abs(evolved.coefficients(2)) - 1.0) < 1e-12);
    for (Eigen::Index i = 0; i < evolved.coefficients.size(); ++i)
      if (i != 2) CHECK(std::abs(evolved.coefficients(i)) == 0.0);
  }

  SUBCASE("negative time rejected") {
    CHECK_THROWS_AS(subdyn::propagate_projected(state, theta, -1.0), ValidationError);
  }

  SUBCASE("cross-module agreement with exact propagation") {
    SplitMix64 rng(3);
    StateVector psi(static_cast<Eigen::Index>(f.basis.dim));
    for (Eigen::Index i = 0; i < psi.size(); ++i)
      psi(i) = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    psi.normalize();
    const auto projected0 = subdyn::project_state(f.ws, psi, sets);
    const auto evolved = subdyn::propagate_projected(projected0, theta, 1.0);
    const StateVector psi_t = oracle::exact_propagate(f.es, psi, 1.0);
    const auto projected_t = subdyn::project_state(f.ws, psi_t, sets);
    CHECK((evolved.coefficients - projected_t.coefficients).norm() < 1e-7);
  }
}

TEST_CASE("two-segment phases add like the accumulated integral") {
  // the free energies are linear in J, so evolving 0.4 at J=1 then 0.6 at J=2
  // must equal a single unit step at the time-averaged J
  model::ModelConfig c1 = instance(0.0, 1);
  model::ModelConfig c2 = instance(0.0, 1);
  c2.J = model::JProfile::constant(2.0);
  model::ModelConfig c3 = instance(0.0, 1);
  c3.J = model::JProfile::constant(1.0 * 0.4 + 2.0 * 0.6);

  Fixture f1(c1), f2(c2), f3(c3);
  const auto theta1 =
      subdyn::intermediate_operator(f1.ws, subdyn::build_sets(f1.ws, subdyn::Mode::Exact, &f1.es));
  const auto theta2 =
      subdyn::intermediate_operator(f2.ws, subdyn::build_sets(f2.ws, subdyn::Mode::Exact, &f2.es));
  const auto theta3 =
      subdyn::intermediate_operator(f3.ws, subdyn::build_sets(f3.ws, subdyn::Mode::Exact, &f3.es));

  subdyn::ProjectedState state;
  state.coefficients = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(f1.basis.dim));
  state.coefficients(0) = std::sqrt(0.5);
  state.coefficients(7) = std::sqrt(0.5);

  const auto segmented = subdyn::propagate_projected(state, {{&theta1, 0.4}, {&theta2, 0.6}});
  const auto direct = subdyn::propagate_projected(state, theta3, 1.0);
  CHECK((segmented.coefficients - direct.coefficients).norm() < 1e-12);
}

TEST_CASE("reduced projected density") {
  SUBCASE("zero coupling recovers the reduced state") {
    Fixture f(instance(0.0, 1));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);

    OperatorMatrix rho_sys = OperatorMatrix::Zero(4, 4);
    rho_sys(0, 0) = 0.5;
    rho_sys(1, 1) = 0.5;
    rho_sys(0, 1) = 0.25;
    rho_sys(1, 0) = 0.25;
    OperatorMatrix rho_bath = OperatorMatrix::Zero(2, 2);
    rho_bath(0, 0) = 0.8;
    rho_bath(1, 1) = 0.2;
    const OperatorMatrix rho = kron(rho_sys, rho_bath);

    const auto reduced = subdyn::reduced_projected_density(f.ws, rho, sets);
    CHECK((reduced.rho_system - rho_sys).norm() < 1e-12);
    CHECK(!reduced.trace_warning);

    // projecting a basis projector leaves a rank-1 system state
    const OperatorMatrix rho_basis = f.basis.projector(2);
    const auto reduced_basis = subdyn::reduced_projected_density(f.ws, rho_basis, sets);
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> eig(reduced_basis.rho_system);
    int rank = 0;
    for (Eigen::Index i = 0; i < 4; ++i)
      if (eig.eigenvalues()(i) > 1e-10) ++rank;
    CHECK(rank == 1);
  }

  SUBCASE("trace identity on the exact instance") {
    Fixture f(instance(0.05));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    SplitMix64 rng(5);
    StateVector psi(static_cast<Eigen::Index>(f.basis.dim));
    for (Eigen::Index i = 0; i < psi.size(); ++i)
      psi(i) = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    psi.normalize();
    const OperatorMatrix rho = psi * psi.adjoint();
    const auto reduced = subdyn::reduced_projected_density(f.ws, rho, sets);

    Complex expected{0.0, 0.0};
    for (const auto& set : sets) {
      const StateVector phi = f.basis.vector(set.index);
      expected += (phi.adjoint() * set.Pi * rho * phi)(0);
    }
    CHECK(std::abs(reduced.trace - std::real(expected)) < 1e-10);
    CHECK(reduced.trace > 0.0);
    CHECK(reduced.trace <= 1.0 + 1e-10);
  }

  SUBCASE("non-positive trace raises the warning flag only") {
    Fixture f(instance(0.0, 1));
    auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    for (auto& set : sets) set.Pi = -set.Pi;  // synthetic sign flip
    const OperatorMatrix rho =
        OperatorMatrix::Identity(static_cast<Eigen::Index>(f.basis.dim),
                                 static_cast<Eigen::Index>(f.basis.dim)) /
        static_cast<double>(f.basis.dim);
    const auto reduced = subdyn::reduced_projected_density(f.ws, rho, sets);
    CHECK(reduced.trace_warning);
    CHECK(reduced.trace < 0.0);
  }
}

TEST_CASE("fidelity") {
  SUBCASE("identical pure states") {
    OperatorMatrix rho = OperatorMatrix::Zero(4, 4);
    rho(0, 0) = 1.0;
    CHECK(subdyn::fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("orthogonal pure states") {
    OperatorMatrix a = OperatorMatrix::Zero(4, 4);
    OperatorMatrix b = OperatorMatrix::Zero(4, 4);
    a(0, 0) = 1.0;
    b(1, 1) = 1.0;
    CHECK(subdyn::fidelity(a, b) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("propagated mixtures keep unit fidelity") {
    Fixture f(instance(0.05));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    const auto theta = subdyn::intermediate_operator(f.ws, sets);
    SplitMix64 rng(17);
    for (int probe = 0; probe < 5; ++probe) {
      OperatorMatrix rho = OperatorMatrix::Zero(static_cast<Eigen::Index>(f.basis.dim),
                                                static_cast<Eigen::Index>(f.basis.dim));
      double total = 0.0;
      for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        rho(i, i) = rng.uniform();
        total += std::real(rho(i, i));
      }
      rho /= total;
      const OperatorMatrix rho_t = subdyn::propagate_projected_density(rho, theta, 2.6);
      CHECK(std::abs(subdyn::fidelity(rho, rho_t) - 1.0) < 1e-10);
    }
  }

  SUBCASE("far-from-commuting arguments are rejected") {
    OperatorMatrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    OperatorMatrix one = OperatorMatrix::Zero(2, 2);
    one(1, 1) = 1.0;
    CHECK_THROWS_AS(subdyn::fidelity(plus, one), ValidationError);
  }

  SUBCASE("negative eigenvalues are rejected") {
    OperatorMatrix bad = OperatorMatrix::Zero(2, 2);
    bad(0, 0) = 1.1;
    bad(1, 1) = -0.1;
    CHECK_THROWS_AS(subdyn::fidelity(bad, bad), ValidationError);
  }
}

TEST_CASE("perturbation scaling of the shift prediction") {
  double residual_high = 0.0;
  double residual_low = 0.0;
  for (const double lambda : {0.1, 0.05}) {
    Fixture f(instance(lambda));
    const auto sets = subdyn::build_sets(f.ws, subdyn::Mode::Exact, &f.es);
    double worst = 0.0;
    for (const auto& set : sets) {
      const Complex prediction = subdyn::order2_shift_prediction(f.ws, set.index);
      worst = std::max(worst, std::abs(std::real(set.delta_e) - std::real(prediction)));
      // the oracle equivalence holds across the whole coupling range used here
      CHECK((set.Pi - oracle::exact_projector(f.es, set.index)).norm() < 1e-7);
    }
    (lambda == 0.1 ? residual_high : residual_low) = worst;
  }
  CHECK(residual_low > 0.0);
  CHECK(residual_high / residual_low >= 6.0);
}
