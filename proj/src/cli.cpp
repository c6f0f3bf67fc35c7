#include "ske/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "ske/config_io.hpp"
#include "ske/dfcheck.hpp"
#include "ske/gates.hpp"
#include "ske/model.hpp"
#include "ske/oracle.hpp"
#include "ske/rng.hpp"
#include "ske/subdyn.hpp"

namespace ske::cli {

namespace {

using io::Json;
using io::Table;

constexpr double kFidelityProbeTime = 1.7;

struct CommandOutput {
  Json results;
  std::optional<Table> table;
};

Json complex_to_json(Complex z) { return Json::array({std::real(z), std::imag(z)}); }

Json matrix_to_json(const OperatorMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

std::string occupations_string(const model::CompositeIndex& nu) {
  std::string s;
  for (std::size_t k = 0; k < nu.occupations.size(); ++k) {
    if (k) s += " ";
    s += std::to_string(nu.occupations[k]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

CommandOutput cmd_spectrum(const io::RunConfig& run) {
  const model::Hamiltonians hams = model::build_hamiltonians(run.model);
  const model::UnperturbedBasis basis = model::unperturbed_basis(run.model);
  const oracle::EigenSystem es = oracle::exact_eigensystem(hams.h_total, basis.vectors, run.tol);

  CommandOutput out;
  out.table = Table{{"nu", "j", "occupations", "e0", "e_exact", "shift", "overlap"}, {}};
  Json rows = Json::array();
  for (std::size_t nu = 0; nu < basis.dim; ++nu) {
    const double e0 = basis.energies[nu];
    const double ex = es.ambiguous[nu] ? std::nan("") : es.value(nu);
    Json row;
    row["nu"] = basis.labels[nu].to_string();
    row["j"] = basis.labels[nu].j;
    row["occupations"] = occupations_string(basis.labels[nu]);
    row["e0"] = e0;
    row["e_exact"] = ex;
    row["shift"] = ex - e0;
    row["overlap"] = es.overlaps[nu];
    rows.push_back(row);
    out.table->rows.push_back({basis.labels[nu].to_string(), std::to_string(basis.labels[nu].j),
                               occupations_string(basis.labels[nu]), io::format_double(e0),
                               io::format_double(ex), io::format_double(ex - e0),
                               io::format_double(es.overlaps[nu])});
  }
  out.results["rows"] = rows;
  return out;
}

CommandOutput cmd_subdyn(const io::RunConfig& run) {
  const model::Hamiltonians hams = model::build_hamiltonians(run.model);
  const model::UnperturbedBasis basis = model::unperturbed_basis(run.model);
  const subdyn::Workspace ws(hams, basis, run.tol);
  const bool exact = run.order == subdyn::Mode::Exact;

  std::optional<oracle::EigenSystem> es;
  if (exact) es = oracle::exact_eigensystem(hams.h_total, basis.vectors, run.tol);
  const auto sets = subdyn::build_sets(ws, run.order, exact ? &*es : nullptr);
  const auto theta = subdyn::intermediate_operator(ws, sets);

  const OperatorMatrix identity =
      OperatorMatrix::Identity(hams.h_total.rows(), hams.h_total.cols());

  CommandOutput out;
  out.table = Table{{"nu", "e0", "delta_e_re", "delta_e_im", "c_norm", "support_c", "support_d",
                     "pi_idem", "commutator", "pi_vs_oracle", "theta_vs_oracle", "order2_shift",
                     "order2_prediction_re"},
                    {}};
  Json rows = Json::array();
  OperatorMatrix pi_sum = OperatorMatrix::Zero(identity.rows(), identity.cols());
  double raw_invariance = 0.0;
  for (const auto& set : sets) {
    const std::size_t nu = set.index;
    const OperatorMatrix q = identity - set.P;
    const double support_c = (set.C - q * set.C * set.P).norm();
    const double support_d = (set.D - set.P * set.D * q).norm();
    const double pi_idem = (set.Pi * set.Pi - set.Pi).norm();
    const double comm = (hams.h_total * set.Pi - set.Pi * hams.h_total).norm();
    double pi_vs_oracle = std::nan("");
    double theta_vs_oracle = std::nan("");
    if (exact) {
      pi_vs_oracle = (set.Pi - oracle::exact_projector(*es, nu)).norm();
      theta_vs_oracle =
          std::abs(basis.energies[nu] + std::real(set.delta_e) - es->value(nu));
    }
    const double order2 = subdyn::order2_shift(ws, nu);
    const Complex prediction = subdyn::order2_shift_prediction(ws, nu);
    const Complex theta_nu = theta.eigenvalues[nu];
    raw_invariance = std::max(
        raw_invariance,
        (theta.raw * set.P - theta_nu * set.P).norm());
    pi_sum += set.Pi;

    Json row;
    row["nu"] = set.nu.to_string();
    row["e0"] = basis.energies[nu];
    row["delta_e"] = complex_to_json(set.delta_e);
    row["c_norm"] = set.C.norm();
    row["d_norm"] = set.D.norm();
    row["support_c"] = support_c;
    row["support_d"] = support_d;
    row["pi_idempotence"] = pi_idem;
    row["commutator"] = comm;
    row["pi_vs_oracle"] = pi_vs_oracle;
    row["theta_vs_oracle"] = theta_vs_oracle;
    row["order2_shift"] = order2;
    row["order2_prediction"] = complex_to_json(prediction);
    row["normalization"] = set.normalization;
    row["shift_imag_warning"] = set.shift_imag_warning;
    rows.push_back(row);
    out.table->rows.push_back(
        {set.nu.to_string(), io::format_double(basis.energies[nu]),
         io::format_double(std::real(set.delta_e)), io::format_double(std::imag(set.delta_e)),
         io::format_double(set.C.norm()), io::format_double(support_c),
         io::format_double(support_d), io::format_double(pi_idem), io::format_double(comm),
         io::format_double(pi_vs_oracle), io::format_double(theta_vs_oracle),
         io::format_double(order2), io::format_double(std::real(prediction))});
  }
  out.results["rows"] = rows;
  out.results["pi_completeness"] = (pi_sum - identity).norm();
  out.results["theta_raw_invariance"] = raw_invariance;
  out.results["theta_assembled_invariance"] =
      (theta.assembled() - theta.spectral.assemble()).norm();
  return out;
}

CommandOutput cmd_gates(const io::RunConfig& run) {
  const double tau_s = gates::swap_duration(run.model.J);
  const OperatorMatrix u_swap = gates::ideal_swap_system();
  const OperatorMatrix root = gates::swap_sqrt();
  const OperatorMatrix u_xor = gates::xor_gate();
  const auto pattern = gates::conditional_pattern(u_xor);

  const OperatorMatrix phi = model::system_eigenvectors();
  Json phases = Json::array();
  for (int j = 0; j < 4; ++j)
    phases.push_back(complex_to_json((phi.col(j).adjoint() * u_swap * phi.col(j))(0)));

  const OperatorMatrix id4 = OperatorMatrix::Identity(4, 4);
  CommandOutput out;
  out.results["tau_s"] = tau_s;
  out.results["swap_phases"] = phases;
  out.results["u_swap"] = matrix_to_json(u_swap);
  out.results["u_swap_unitarity"] = (u_swap.adjoint() * u_swap - id4).norm();
  out.results["swap_sqrt_residual"] = (root * root - u_swap).norm();
  out.results["u_xor"] = matrix_to_json(u_xor);
  out.results["u_xor_unitarity"] = (u_xor.adjoint() * u_xor - id4).norm();
  out.results["xor_conditional_pattern"] = pattern.permutation;
  out.results["xor_invariant"] = complex_to_json(pattern.invariant);
  return out;
}

std::vector<Complex> collect_shifts(const io::RunConfig& run, const model::Hamiltonians& hams,
                                    const model::UnperturbedBasis& basis) {
  const subdyn::Workspace ws(hams, basis, run.tol);
  std::optional<oracle::EigenSystem> es;
  if (run.order == subdyn::Mode::Exact)
    es = oracle::exact_eigensystem(hams.h_total, basis.vectors, run.tol);
  std::vector<Complex> shifts;
  shifts.reserve(basis.dim);
  for (std::size_t nu = 0; nu < basis.dim; ++nu) {
    const OperatorMatrix c = subdyn::creation_operator(ws, nu, run.order, es ? &*es : nullptr);
    shifts.push_back(subdyn::energy_shift(ws, nu, c, run.order));
  }
  return shifts;
}

CommandOutput cmd_correct(const io::RunConfig& run) {
  const model::Hamiltonians hams = model::build_hamiltonians(run.model);
  const model::UnperturbedBasis basis = model::unperturbed_basis(run.model);
  const std::vector<Complex> shifts = collect_shifts(run, hams, basis);

  const auto report = gates::delta_t_correction(run.model, basis, shifts, run.tol);
  double dt = 0.0;
  if (report.uniform_delta_t) {
    dt = *report.uniform_delta_t;
  } else if (!report.delta_t.empty()) {
    for (double v : report.delta_t) dt += v;
    dt /= static_cast<double>(report.delta_t.size());
  }
  const auto corrected = gates::corrected_swap(run.model, basis, shifts, dt, run.tol);

  CommandOutput out;
  out.table = Table{{"nu", "delta_e_re", "delta_t", "eq_lhs", "target"}, {}};
  Json rows = Json::array();
  for (std::size_t nu = 0; nu < basis.dim; ++nu) {
    const double target =
        (basis.labels[nu].j == 4) ? -3.0 * std::numbers::pi / 4.0 : std::numbers::pi / 4.0;
    Json row;
    row["nu"] = basis.labels[nu].to_string();
    row["delta_e"] = complex_to_json(shifts[nu]);
    row["delta_t"] = report.delta_t[nu];
    row["eq_lhs"] = report.eq_lhs[nu];
    row["target"] = target;
    row["corrected_residual"] = corrected.residual_per_nu[nu];
    rows.push_back(row);
    out.table->rows.push_back({basis.labels[nu].to_string(),
                               io::format_double(std::real(shifts[nu])),
                               io::format_double(report.delta_t[nu]),
                               io::format_double(report.eq_lhs[nu]), io::format_double(target)});
  }
  out.results["tau_s"] = report.tau_s;
  out.results["uniform_shift_violated"] = report.uniform_shift_violated;
  if (report.uniform_delta_t)
    out.results["uniform_delta_t"] = *report.uniform_delta_t;
  else
    out.results["uniform_delta_t"] = nullptr;
  out.results["applied_delta_t"] = dt;
  out.results["rows"] = rows;
  out.results["corrected_residual"] = corrected.residual;
  out.results["bath_phase_mismatch"] = corrected.bath_phase_mismatch;
  return out;
}

CommandOutput cmd_fidelity(const io::RunConfig& run) {
  const model::Hamiltonians hams = model::build_hamiltonians(run.model);
  const model::UnperturbedBasis basis = model::unperturbed_basis(run.model);
  const subdyn::Workspace ws(hams, basis, run.tol);
  std::optional<oracle::EigenSystem> es;
  if (run.order == subdyn::Mode::Exact)
    es = oracle::exact_eigensystem(hams.h_total, basis.vectors, run.tol);
  const auto sets = subdyn::build_sets(ws, run.order, es ? &*es : nullptr);
  const auto theta = subdyn::intermediate_operator(ws, sets);

  SplitMix64 rng(run.seed);
  CommandOutput out;
  out.table = Table{{"probe", "fidelity", "deviation"}, {}};
  Json rows = Json::array();
  double worst = 0.0;
  for (int probe = 0; probe < run.fidelity_probes; ++probe) {
    Eigen::VectorXd weights(static_cast<Eigen::Index>(basis.dim));
    double total = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      weights(i) = rng.uniform();
      total += weights(i);
    }
    weights /= total;
    OperatorMatrix rho0 = OperatorMatrix::Zero(static_cast<Eigen::Index>(basis.dim),
                                               static_cast<Eigen::Index>(basis.dim));
    for (Eigen::Index i = 0; i < weights.size(); ++i) rho0(i, i) = weights(i);
    const OperatorMatrix rho_t =
        subdyn::propagate_projected_density(rho0, theta, kFidelityProbeTime);
    const double f = subdyn::fidelity(rho0, rho_t, run.tol);
    worst = std::max(worst, std::abs(f - 1.0));
    Json row;
    row["probe"] = probe;
    row["fidelity"] = f;
    rows.push_back(row);
    out.table->rows.push_back(
        {std::to_string(probe), io::format_double(f), io::format_double(std::abs(f - 1.0))});
  }
  out.results["probes"] = rows;
  out.results["max_deviation"] = worst;
  out.results["probe_time"] = kFidelityProbeTime;
  return out;
}

CommandOutput cmd_dfcheck(const io::RunConfig& run) {
  const model::Hamiltonians hams = model::build_hamiltonians(run.model);
  const model::UnperturbedBasis basis = model::unperturbed_basis(run.model);
  const subdyn::Workspace ws(hams, basis, run.tol);
  std::optional<oracle::EigenSystem> es;
  if (run.order == subdyn::Mode::Exact)
    es = oracle::exact_eigensystem(hams.h_total, basis.vectors, run.tol);
  const auto sets = subdyn::build_sets(ws, run.order, es ? &*es : nullptr);
  const auto report = dfcheck::df_residual(ws, sets);

  std::vector<Complex> g;
  for (const auto& m : run.model.modes) g.push_back(m.g);

  CommandOutput out;
  out.table = Table{{"occupations", "constraint_re", "constraint_im", "bv_holds",
                     "order2_per_mode", "order2_common"},
                    {}};
  Json rows = Json::array();
  double worst_constraint = 0.0;
  double worst_order2 = 0.0;
  int failing = 0;
  const std::size_t bath_dim = run.model.bath_dimension();
  const bool dephasing = run.model.coupling == model::CouplingKind::Dephasing;
  for (std::size_t f = 0; f < bath_dim; ++f) {
    const model::CompositeIndex label = model::index_from_flat(f, run.model);
    std::vector<double> n(label.occupations.begin(), label.occupations.end());
    const Complex constraint = dfcheck::bath_df_constraint(g, n);
    const auto bv = dfcheck::bv_condition(g, n);
    bool bv_all = true;
    for (bool h : bv.holds) bv_all = bv_all && h;
    dfcheck::Order2Residual order2;
    if (dephasing) order2 = dfcheck::order2_df_residual(run.model, label.occupations, 1);
    worst_constraint = std::max(worst_constraint, std::abs(constraint));
    worst_order2 = std::max(worst_order2, std::abs(order2.per_mode));
    if (std::abs(constraint) > 1e-12) ++failing;

    Json row;
    row["occupations"] = occupations_string(label);
    row["constraint"] = complex_to_json(constraint);
    row["bv_holds"] = bv_all;
    row["order2_per_mode"] = complex_to_json(order2.per_mode);
    row["order2_common"] = complex_to_json(order2.common);
    rows.push_back(row);
    out.table->rows.push_back({occupations_string(label),
                               io::format_double(std::real(constraint)),
                               io::format_double(std::imag(constraint)),
                               bv_all ? "true" : "false",
                               io::format_double(std::abs(order2.per_mode)),
                               io::format_double(std::abs(order2.common))});
  }
  out.results["residual_hilbert"] = report.residual_hilbert;
  out.results["rows"] = rows;
  out.results["max_constraint"] = worst_constraint;
  out.results["failing_occupations"] = failing;
  out.results["max_order2_per_mode"] = worst_order2;
  return out;
}

CommandOutput cmd_triangulate(const io::RunConfig& run) {
  CommandOutput out;
  out.table = Table{{"mode", "n", "omega", "g", "gamma", "zeta", "det", "lower_left",
                     "eig_low", "eig_high"},
                    {}};
  Json rows = Json::array();
  for (std::size_t k = 0; k < run.model.modes.size(); ++k) {
    const auto& mode = run.model.modes[k];
    for (int n = 0; n < run.model.n_max; ++n) {
      const auto block =
          dfcheck::triangulate_block(mode.omega, mode.g, n, run.branch, run.tol);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(block.M);
      Json row;
      row["mode"] = k + 1;
      row["n"] = n;
      row["omega"] = block.omega;
      row["g"] = block.g;
      row["gamma"] = block.gamma;
      row["zeta"] = block.zeta;
      row["second_column_adjusted"] = block.second_column_adjusted;
      row["det"] = block.T.determinant();
      row["lower_left"] = block.M_tri(1, 0);
      row["diag"] = {block.M_tri(0, 0), block.M_tri(1, 1)};
      row["eigenvalues"] = {eig.eigenvalues()(0), eig.eigenvalues()(1)};
      rows.push_back(row);
      out.table->rows.push_back(
          {std::to_string(k + 1), std::to_string(n), io::format_double(block.omega),
           io::format_double(block.g), io::format_double(block.gamma),
           io::format_double(block.zeta), io::format_double(block.T.determinant()),
           io::format_double(block.M_tri(1, 0)), io::format_double(eig.eigenvalues()(0)),
           io::format_double(eig.eigenvalues()(1))});
    }
  }
  out.results["rows"] = rows;
  return out;
}

CommandOutput cmd_liouville(const io::RunConfig& run) {
  const auto report = dfcheck::liouville_df(run.model, run.branch, run.tol);
  CommandOutput out;
  out.results["residual_liouville"] = report.residual_liouville;
  out.results["liouville_lower_norm"] = report.liouville_lower_norm;
  out.results["fidelity"] = report.fidelity;
  out.results["swap_invariance"] = report.swap_invariance;
  out.results["state_invariance"] = report.state_invariance;
  out.results["lambda_bound"] =
      run.tol.df_order2_scale * run.model.lambda * run.model.lambda;
  return out;
}

// ---------------------------------------------------------------------------
// dispatch plumbing
// ---------------------------------------------------------------------------

CommandOutput dispatch(const std::string& command, const io::RunConfig& run);

struct SweepSpec {
  std::string parameter;  // "lambda" or "n_max"
  double start = 0.0;
  double stop = 0.0;
  int count = 0;
};

SweepSpec parse_sweep(const std::string& text) {
  SweepSpec spec;
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw SchemaError("sweep spec must be parameter=start:stop:count");
  spec.parameter = text.substr(0, eq);
  if (spec.parameter != "lambda" && spec.parameter != "n_max")
    throw SchemaError("sweep parameter must be lambda or n_max");
  const std::string rest = text.substr(eq + 1);
  const auto c1 = rest.find(':');
  const auto c2 = rest.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw SchemaError("sweep spec must be parameter=start:stop:count");
  try {
    spec.start = std::stod(rest.substr(0, c1));
    spec.stop = std::stod(rest.substr(c1 + 1, c2 - c1 - 1));
    spec.count = std::stoi(rest.substr(c2 + 1));
  } catch (const std::exception&) {
    throw SchemaError("sweep spec values must be numeric");
  }
  if (spec.count < 1) throw SchemaError("sweep count must be >= 1");
  return spec;
}

CommandOutput cmd_sweep(const std::string& target, const std::string& sweep_text,
                        const io::RunConfig& run) {
  const SweepSpec spec = parse_sweep(sweep_text);
  CommandOutput out;
  out.results["parameter"] = spec.parameter;
  Json points = Json::array();
  Table merged;
  bool merged_ready = false;
  for (int i = 0; i < spec.count; ++i) {
    const double value =
        spec.count == 1
            ? spec.start
            : spec.start + (spec.stop - spec.start) * static_cast<double>(i) / (spec.count - 1);
    io::RunConfig point = run;
    if (spec.parameter == "lambda") {
      point.model.lambda = value;
    } else {
      point.model.n_max = static_cast<int>(std::lround(value));
      if (point.model.n_max < 1) throw SchemaError("swept n_max must stay >= 1");
    }
    CommandOutput result = dispatch(target, point);
    Json entry;
    entry[spec.parameter] = spec.parameter == "lambda" ? Json(value)
                                                       : Json(point.model.n_max);
    entry["results"] = result.results;
    points.push_back(entry);
    if (result.table) {
      if (!merged_ready) {
        merged.columns = result.table->columns;
        merged.columns.insert(merged.columns.begin(), spec.parameter);
        merged_ready = true;
      }
      for (auto row : result.table->rows) {
        row.insert(row.begin(), spec.parameter == "lambda"
                                    ? io::format_double(value)
                                    : std::to_string(point.model.n_max));
        merged.rows.push_back(row);
      }
    }
  }
  out.results["points"] = points;
  if (merged_ready) out.table = merged;
  return out;
}

CommandOutput dispatch(const std::string& command, const io::RunConfig& run) {
  if (command == "spectrum") return cmd_spectrum(run);
  if (command == "subdyn") return cmd_subdyn(run);
  if (command == "gates") return cmd_gates(run);
  if (command == "correct") return cmd_correct(run);
  if (command == "fidelity") return cmd_fidelity(run);
  if (command == "df-check") return cmd_dfcheck(run);
  if (command == "triangulate") return cmd_triangulate(run);
  if (command == "liouville") return cmd_liouville(run);
  throw SchemaError("unknown command: " + command);
}

void emit(std::ostream& os, const std::string& command, const io::RunConfig& run,
          const CommandOutput& output, const std::string& format) {
  if (format == "json") {
    Json report;
    report["command"] = command;
    report["order"] = run.order == subdyn::Mode::Exact ? "exact" : "order1";
    report["branch"] = run.branch == dfcheck::Branch::Plus ? "plus" : "minus";
    report["tolerances"] = io::tolerances_to_json(run.tol);
    report["model"] = io::model_to_json(run.model);
    report["results"] = output.results;
    io::write_json(os, report, 2);
    return;
  }
  // CSV: provenance header as comment lines, then the table (or a flattened
  // key,value listing when the command has no natural table).
  os << "# command = " << command << "\n";
  os << "# order = " << (run.order == subdyn::Mode::Exact ? "exact" : "order1") << "\n";
  const Json tol_json = io::tolerances_to_json(run.tol);
  for (const auto& [key, value] : tol_json.items())
    os << "# tolerance." << key << " = " << io::format_double(value.get<double>()) << "\n";
  if (output.table) {
    io::write_csv(os, *output.table);
  } else {
    io::write_csv(os, io::flatten_to_table(output.results));
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"subdynamics toolkit for a two-qubit spin-boson model"};
  app.require_subcommand(1);

  std::string config_path;
  std::string order_flag;
  std::string branch_flag;
  std::string out_path;
  std::string format = "json";
  std::string sweep_spec;
  std::string sweep_target;

  const std::vector<std::string> commands = {"spectrum", "subdyn",      "gates",
                                             "correct",  "fidelity",    "df-check",
                                             "triangulate", "liouville"};
  std::map<std::string, CLI::App*> subs;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "model configuration (JSON)")->required();
    sub->add_option("--order", order_flag, "exact|order1")
        ->check(CLI::IsMember({"exact", "order1"}));
    sub->add_option("--branch", branch_flag, "plus|minus (gamma sign)")
        ->check(CLI::IsMember({"plus", "minus"}));
    sub->add_option("--out", out_path, "write the report to this path");
    sub->add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  };
  for (const auto& name : commands) {
    subs[name] = app.add_subcommand(name, "");
    add_common(subs[name]);
  }
  CLI::App* sweep = app.add_subcommand("sweep", "repeat a command over a parameter grid");
  sweep->add_option("command", sweep_target, "command to repeat")
      ->required()
      ->check(CLI::IsMember(commands));
  sweep->add_option("--sweep", sweep_spec, "lambda=a:b:n or n_max=a:b:n")->required();
  add_common(sweep);

  std::vector<const char*> argv;
  argv.push_back("ske");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    io::RunConfig run_config = io::load_run_config(config_path);
    if (order_flag == "exact") run_config.order = subdyn::Mode::Exact;
    if (order_flag == "order1") run_config.order = subdyn::Mode::Order1;
    if (branch_flag == "plus") run_config.branch = dfcheck::Branch::Plus;
    if (branch_flag == "minus") run_config.branch = dfcheck::Branch::Minus;
    if (const char* cap = std::getenv("SUBDYN_MAX_DIM")) {
      char* end = nullptr;
      const unsigned long long value = std::strtoull(cap, &end, 10);
      if (end == cap || *end != '\0' || value == 0)
        throw SchemaError("SUBDYN_MAX_DIM must be a positive integer");
      run_config.model.max_dim = static_cast<std::size_t>(value);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    CommandOutput output = (command == "sweep") ? cmd_sweep(sweep_target, sweep_spec, run_config)
                                                : dispatch(command, run_config);

    if (!out_path.empty()) {
      std::ofstream file(out_path, std::ios::binary);
      if (!file) throw SchemaError("cannot open output path: " + out_path);
      emit(file, command == "sweep" ? "sweep " + sweep_target : command, run_config, output,
           format);
    } else {
      emit(out, command == "sweep" ? "sweep " + sweep_target : command, run_config, output,
           format);
    }
    return 0;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const SingularError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ske::cli
