#include "ske/config_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ske::io {

namespace {

using nlohmann::json;

void reject_unknown_keys(const Json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const auto& a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw SchemaError("unknown key '" + key + "' in " + where);
  }
}

double require_number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + " must be a number");
  return j.get<double>();
}

int require_integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SchemaError(where + " must be an integer");
  return j.get<int>();
}

Complex parse_complex(const Json& j, const std::string& where) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Complex(j[0].get<double>(), j[1].get<double>());
  throw SchemaError(where + " must be a number or a [re, im] pair");
}

model::JProfile parse_j_profile(const Json& j) {
  if (j.is_number()) return model::JProfile::constant(j.get<double>());
  if (j.is_array()) {
    std::vector<model::JProfile::Segment> segments;
    for (const auto& seg : j) {
      if (!(seg.is_array() && seg.size() == 2 && seg[0].is_number() && seg[1].is_number()))
        throw SchemaError("model.J segments must be [duration, value] pairs");
      segments.push_back({seg[0].get<double>(), seg[1].get<double>()});
    }
    return model::JProfile::piecewise(std::move(segments));
  }
  throw SchemaError("model.J must be a number or a list of [duration, value] pairs");
}

model::SpinAxis parse_axis(const Json& j) {
  const std::string s = j.is_string() ? j.get<std::string>() : "";
  if (s == "x") return model::SpinAxis::X;
  if (s == "y") return model::SpinAxis::Y;
  if (s == "z") return model::SpinAxis::Z;
  throw SchemaError("mode axis must be \"x\", \"y\" or \"z\"");
}

model::ModelConfig parse_model(const Json& j) {
  if (!j.is_object()) throw SchemaError("model must be an object");
  reject_unknown_keys(j, {"J", "lambda", "modes", "n_max", "coupling"}, "model");
  model::ModelConfig config;
  if (!j.contains("J") || !j.contains("lambda") || !j.contains("modes") || !j.contains("n_max"))
    throw SchemaError("model requires J, lambda, modes and n_max");

  config.J = parse_j_profile(j.at("J"));
  config.lambda = require_number(j.at("lambda"), "model.lambda");
  config.n_max = require_integer(j.at("n_max"), "model.n_max");

  if (j.contains("coupling")) {
    const std::string kind = j.at("coupling").is_string() ? j.at("coupling").get<std::string>() : "";
    if (kind == "dephasing")
      config.coupling = model::CouplingKind::Dephasing;
    else if (kind == "caldeira_leggett")
      config.coupling = model::CouplingKind::CaldeiraLeggett;
    else
      throw SchemaError("model.coupling must be \"dephasing\" or \"caldeira_leggett\"");
  }

  if (!j.at("modes").is_array() || j.at("modes").empty())
    throw SchemaError("model.modes must be a non-empty array");
  for (const auto& mj : j.at("modes")) {
    if (!mj.is_object()) throw SchemaError("each mode must be an object");
    if (config.coupling == model::CouplingKind::CaldeiraLeggett) {
      reject_unknown_keys(mj, {"omega", "g", "spin", "axis"}, "model.modes[]");
    } else {
      reject_unknown_keys(mj, {"omega", "g"}, "model.modes[]");
      if (mj.contains("spin") || mj.contains("axis"))
        throw SchemaError("mode spin/axis apply to the caldeira_leggett coupling only");
    }
    if (!mj.contains("omega") || !mj.contains("g"))
      throw SchemaError("each mode requires omega and g");
    model::Mode mode;
    mode.omega = require_number(mj.at("omega"), "mode omega");
    mode.g = parse_complex(mj.at("g"), "mode g");
    if (config.coupling == model::CouplingKind::CaldeiraLeggett) {
      if (mj.contains("spin")) mode.spin = require_integer(mj.at("spin"), "mode spin");
      if (mj.contains("axis")) mode.axis = parse_axis(mj.at("axis"));
    }
    config.modes.push_back(mode);
  }
  return config;
}

Tolerances parse_tolerances(const Json& j) {
  Tolerances tol;
  if (!j.is_object()) throw SchemaError("tolerances must be an object");
  struct Entry {
    const char* name;
    double Tolerances::* field;
  };
  static const std::vector<Entry> entries = {
      {"hermiticity", &Tolerances::hermiticity},
      {"unitarity", &Tolerances::unitarity},
      {"projector", &Tolerances::projector},
      {"orthogonality", &Tolerances::orthogonality},
      {"basis", &Tolerances::basis},
      {"pinv_drop", &Tolerances::pinv_drop},
      {"resolvent_consistency", &Tolerances::resolvent_consistency},
      {"degeneracy_gap", &Tolerances::degeneracy_gap},
      {"overlap_threshold", &Tolerances::overlap_threshold},
      {"oracle_projector", &Tolerances::oracle_projector},
      {"oracle_eigenvalue", &Tolerances::oracle_eigenvalue},
      {"pi_idempotence", &Tolerances::pi_idempotence},
      {"commutator", &Tolerances::commutator},
      {"fidelity", &Tolerances::fidelity},
      {"shift_imag_warn", &Tolerances::shift_imag_warn},
      {"uniform_shift", &Tolerances::uniform_shift},
      {"phase_unit", &Tolerances::phase_unit},
      {"eq_time_correction", &Tolerances::eq_time_correction},
      {"corrected_swap", &Tolerances::corrected_swap},
      {"triangular_lower", &Tolerances::triangular_lower},
      {"triangular_eigen", &Tolerances::triangular_eigen},
      {"det_floor", &Tolerances::det_floor},
      {"df_order2_scale", &Tolerances::df_order2_scale},
      {"state_negativity_clamp", &Tolerances::state_negativity_clamp},
      {"state_negativity_error", &Tolerances::state_negativity_error},
      {"liouville", &Tolerances::liouville},
  };
  std::vector<std::string> names;
  for (const auto& e : entries) names.emplace_back(e.name);
  reject_unknown_keys(j, names, "tolerances");
  for (const auto& e : entries)
    if (j.contains(e.name)) tol.*(e.field) = require_number(j.at(e.name), e.name);
  return tol;
}

}  // namespace

RunConfig parse_run_config(const Json& j) {
  if (!j.is_object()) throw SchemaError("configuration root must be an object");
  reject_unknown_keys(j, {"model", "order", "branch", "seed", "fidelity_probes", "tolerances"},
                      "configuration root");
  if (!j.contains("model")) throw SchemaError("configuration requires a model block");

  RunConfig run;
  run.model = parse_model(j.at("model"));
  if (j.contains("order")) {
    const std::string order = j.at("order").is_string() ? j.at("order").get<std::string>() : "";
    if (order == "exact")
      run.order = subdyn::Mode::Exact;
    else if (order == "order1")
      run.order = subdyn::Mode::Order1;
    else
      throw SchemaError("order must be \"exact\" or \"order1\"");
  }
  if (j.contains("branch")) {
    const std::string branch = j.at("branch").is_string() ? j.at("branch").get<std::string>() : "";
    if (branch == "plus")
      run.branch = dfcheck::Branch::Plus;
    else if (branch == "minus")
      run.branch = dfcheck::Branch::Minus;
    else
      throw SchemaError("branch must be \"plus\" or \"minus\"");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw SchemaError("seed must be an integer");
    run.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("fidelity_probes")) {
    run.fidelity_probes = require_integer(j.at("fidelity_probes"), "fidelity_probes");
    if (run.fidelity_probes < 1) throw SchemaError("fidelity_probes must be >= 1");
  }
  if (j.contains("tolerances")) run.tol = parse_tolerances(j.at("tolerances"));
  return run;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

Json model_to_json(const model::ModelConfig& config) {
  Json j;
  if (config.J.is_constant()) {
    j["J"] = config.J.constant_value();
  } else {
    Json segs = Json::array();
    for (const auto& s : config.J.segments()) segs.push_back({s.duration, s.value});
    j["J"] = segs;
  }
  j["lambda"] = config.lambda;
  Json modes = Json::array();
  for (const auto& m : config.modes) {
    Json mj;
    mj["omega"] = m.omega;
    if (std::imag(m.g) == 0.0)
      mj["g"] = std::real(m.g);
    else
      mj["g"] = {std::real(m.g), std::imag(m.g)};
    if (config.coupling == model::CouplingKind::CaldeiraLeggett) {
      mj["spin"] = m.spin;
      mj["axis"] = m.axis == model::SpinAxis::X ? "x" : (m.axis == model::SpinAxis::Y ? "y" : "z");
    }
    modes.push_back(mj);
  }
  j["modes"] = modes;
  j["n_max"] = config.n_max;
  j["coupling"] =
      config.coupling == model::CouplingKind::Dephasing ? "dephasing" : "caldeira_leggett";
  j["dimension"] = config.dimension();
  return j;
}

Json tolerances_to_json(const Tolerances& tol) {
  Json j;
  j["hermiticity"] = tol.hermiticity;
  j["unitarity"] = tol.unitarity;
  j["projector"] = tol.projector;
  j["orthogonality"] = tol.orthogonality;
  j["basis"] = tol.basis;
  j["pinv_drop"] = tol.pinv_drop;
  j["resolvent_consistency"] = tol.resolvent_consistency;
  j["degeneracy_gap"] = tol.degeneracy_gap;
  j["overlap_threshold"] = tol.overlap_threshold;
  j["oracle_projector"] = tol.oracle_projector;
  j["oracle_eigenvalue"] = tol.oracle_eigenvalue;
  j["pi_idempotence"] = tol.pi_idempotence;
  j["commutator"] = tol.commutator;
  j["fidelity"] = tol.fidelity;
  j["shift_imag_warn"] = tol.shift_imag_warn;
  j["uniform_shift"] = tol.uniform_shift;
  j["phase_unit"] = tol.phase_unit;
  j["eq_time_correction"] = tol.eq_time_correction;
  j["corrected_swap"] = tol.corrected_swap;
  j["triangular_lower"] = tol.triangular_lower;
  j["triangular_eigen"] = tol.triangular_eigen;
  j["det_floor"] = tol.det_floor;
  j["df_order2_scale"] = tol.df_order2_scale;
  j["state_negativity_clamp"] = tol.state_negativity_clamp;
  j["state_negativity_error"] = tol.state_negativity_error;
  j["liouville"] = tol.liouville;
  return j;
}

std::string format_double(double value) {
  if (!std::isfinite(value)) return value > 0 ? "\"inf\"" : (value < 0 ? "\"-inf\"" : "\"nan\"");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", value);
  return buf;
}

namespace {

void write_json_impl(std::ostream& os, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * depth), ' ');
  const std::string pad_in(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const char* nl = indent > 0 ? "\n" : "";

  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{" << nl;
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) os << "," << nl;
        first = false;
        os << pad_in << Json(key).dump() << ":" << (indent > 0 ? " " : "");
        write_json_impl(os, value, indent, depth + 1);
      }
      os << nl << pad << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[" << nl;
      bool first = true;
      for (const auto& value : j) {
        if (!first) os << "," << nl;
        first = false;
        os << pad_in;
        write_json_impl(os, value, indent, depth + 1);
      }
      os << nl << pad << "]";
      return;
    }
    case Json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
      return;
  }
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void flatten(const Json& j, const std::string& prefix, Table& table) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items())
      flatten(value, prefix.empty() ? key : prefix + "." + key, table);
  } else if (j.is_array()) {
    std::size_t i = 0;
    for (const auto& value : j) flatten(value, prefix + "[" + std::to_string(i++) + "]", table);
  } else {
    std::string repr;
    if (j.is_number_float())
      repr = format_double(j.get<double>());
    else if (j.is_string())
      repr = j.get<std::string>();
    else
      repr = j.dump();
    table.rows.push_back({prefix, repr});
  }
}

}  // namespace

void write_json(std::ostream& os, const Json& j, int indent) {
  write_json_impl(os, j, indent, 0);
  os << "\n";
}

void write_csv(std::ostream& os, const Table& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) os << ",";
    os << csv_escape(table.columns[c]);
  }
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ",";
      os << csv_escape(row[c]);
    }
    os << "\n";
  }
}

Table flatten_to_table(const Json& j) {
  Table table;
  table.columns = {"key", "value"};
  flatten(j, "", table);
  return table;
}

}  // namespace ske::io
