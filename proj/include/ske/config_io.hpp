// config_io.hpp — strict JSON configuration ingestion and deterministic
// report emission (fixed key order, 15-significant-digit floats)

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ske/dfcheck.hpp"
#include "ske/model.hpp"
#include "ske/subdyn.hpp"
#include "ske/types.hpp"

namespace ske::io {

using Json = nlohmann::ordered_json;

struct RunConfig {
  model::ModelConfig model;
  subdyn::Mode order = subdyn::Mode::Exact;
  dfcheck::Branch branch = dfcheck::Branch::Plus;
  std::uint64_t seed = 12345;
  int fidelity_probes = 20;
  Tolerances tol;
};

// Parses and schema-validates; unknown keys are rejected everywhere.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::string& path);

Json model_to_json(const model::ModelConfig& config);
Json tolerances_to_json(const Tolerances& tol);

std::string format_double(double value);  // %.15g
void write_json(std::ostream& os, const Json& j, int indent = 0);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(std::ostream& os, const Table& table);

// Flattens a report into key,value rows for CSV emission of non-tabular
// commands.
Table flatten_to_table(const Json& j);

}  // namespace ske::io
