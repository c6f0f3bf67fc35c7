#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ske/cli.hpp"
#include "ske/config_io.hpp"

using namespace ske;
using io::Json;

namespace {

Json base_config() {
  Json j;
  j["model"]["J"] = 1.0;
  j["model"]["lambda"] = 0.05;
  j["model"]["modes"] = Json::array({Json{{"omega", 1.0}, {"g", 0.1}}});
  j["model"]["n_max"] = 1;
  return j;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string write_temp(const Json& j, const std::string& name) {
  const std::string path = temp_path(name);
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  return path;
}

int run_cli(const std::vector<std::string>& args, std::string* stdout_text = nullptr,
            std::string* stderr_text = nullptr) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  if (stdout_text) *stdout_text = out.str();
  if (stderr_text) *stderr_text = err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("minimal valid config") {
    const auto run = io::parse_run_config(base_config());
    CHECK(run.model.lambda == 0.05);
    CHECK(run.model.n_max == 1);
    CHECK(run.model.modes.size() == 1);
    CHECK(run.order == subdyn::Mode::Exact);
  }

  SUBCASE("unknown keys rejected at every level") {
    Json j = base_config();
    j["surprise"] = 1;
    CHECK_THROWS_AS(io::parse_run_config(j), SchemaError);

    Json j2 = base_config();
    j2["model"]["extra"] = true;
    CHECK_THROWS_AS(io::parse_run_config(j2), SchemaError);

    Json j3 = base_config();
    j3["model"]["modes"][0]["color"] = "red";
    CHECK_THROWS_AS(io::parse_run_config(j3), SchemaError);

    Json j4 = base_config();
    j4["tolerances"] = Json{{"not_a_tolerance", 1.0}};
    CHECK_THROWS_AS(io::parse_run_config(j4), SchemaError);
  }

  SUBCASE("type errors rejected") {
    Json j = base_config();
    j["model"]["lambda"] = "big";
    CHECK_THROWS_AS(io::parse_run_config(j), SchemaError);

    Json j2 = base_config();
    j2["model"]["n_max"] = 1.5;
    CHECK_THROWS_AS(io::parse_run_config(j2), SchemaError);
  }

  SUBCASE("missing blocks rejected") {
    Json j = base_config();
    j["model"].erase("modes");
    CHECK_THROWS_AS(io::parse_run_config(j), SchemaError);
    Json j2;
    j2["order"] = "exact";
    CHECK_THROWS_AS(io::parse_run_config(j2), SchemaError);
  }

  SUBCASE("J profile forms") {
    Json j = base_config();
    j["model"]["J"] = Json::array({Json::array({0.5, 1.0}), Json::array({0.5, 2.0})});
    const auto run = io::parse_run_config(j);
    CHECK(!run.model.J.is_constant());
    CHECK(run.model.J.segments().size() == 2);

    Json bad = base_config();
    bad["model"]["J"] = Json::array({Json::array({0.5})});
    CHECK_THROWS_AS(io::parse_run_config(bad), SchemaError);
  }

  SUBCASE("complex couplings") {
    Json j = base_config();
    j["model"]["modes"][0]["g"] = Json::array({0.1, 0.02});
    const auto run = io::parse_run_config(j);
    CHECK(run.model.modes[0].g == Complex(0.1, 0.02));
  }

  SUBCASE("order, branch, seed and tolerance overrides") {
    Json j = base_config();
    j["order"] = "order1";
    j["branch"] = "minus";
    j["seed"] = 99;
    j["tolerances"] = Json{{"fidelity", 1e-8}};
    const auto run = io::parse_run_config(j);
    CHECK(run.order == subdyn::Mode::Order1);
    CHECK(run.branch == dfcheck::Branch::Minus);
    CHECK(run.seed == 99);
    CHECK(run.tol.fidelity == 1e-8);
    CHECK(run.tol.hermiticity == Tolerances::defaults().hermiticity);
  }

  SUBCASE("spin and axis only make sense for the caldeira-leggett coupling") {
    Json j = base_config();
    j["model"]["modes"][0]["axis"] = "z";
    CHECK_THROWS_AS(io::parse_run_config(j), SchemaError);

    Json j2 = base_config();
    j2["model"]["coupling"] = "caldeira_leggett";
    j2["model"]["modes"][0]["spin"] = 2;
    j2["model"]["modes"][0]["axis"] = "x";
    const auto run = io::parse_run_config(j2);
    CHECK(run.model.coupling == model::CouplingKind::CaldeiraLeggett);
    CHECK(run.model.modes[0].spin == 2);
    CHECK(run.model.modes[0].axis == model::SpinAxis::X);
  }
}

TEST_CASE("float formatting") {
  CHECK(io::format_double(0.25) == "0.25");
  CHECK(io::format_double(1.0 / 3.0) == "0.333333333333333");
  CHECK(io::format_double(-0.75) == "-0.75");
  CHECK(io::format_double(3e-12) == "3e-12");
}

TEST_CASE("cli dispatch and exit codes") {
  const std::string cfg = write_temp(base_config(), "io_cli_config.json");

  SUBCASE("spectrum runs and reports the singlet energy") {
    std::string text;
    const int code = run_cli({"spectrum", "--config", cfg}, &text);
    CHECK(code == 0);
    CHECK(text.find("\"command\": \"spectrum\"") != std::string::npos);
    CHECK(text.find("\"tolerances\"") != std::string::npos);
    const Json report = Json::parse(text);
    const auto& rows = report.at("results").at("rows");
    CHECK(rows.size() == 8);  // one mode, two Fock levels
    bool singlet_found = false;
    for (const auto& row : rows)
      if (row.at("nu") == "(4,0)" && row.at("e0").get<double>() == -0.75) singlet_found = true;
    CHECK(singlet_found);
  }

  SUBCASE("csv format carries the provenance header") {
    std::string text;
    const int code = run_cli({"spectrum", "--config", cfg, "--format", "csv"}, &text);
    CHECK(code == 0);
    CHECK(text.find("# command = spectrum") != std::string::npos);
    CHECK(text.find("# tolerance.fidelity") != std::string::npos);
    CHECK(text.find("nu,j,occupations,e0") != std::string::npos);
  }

  SUBCASE("missing config file") {
    std::string err;
    const int code = run_cli({"spectrum", "--config", "no_such_file.json"}, nullptr, &err);
    CHECK(code == 1);
    CHECK(err.find("error:") != std::string::npos);
  }

  SUBCASE("schema violation exits 1") {
    Json bad = base_config();
    bad["model"]["n_max"] = 0;
    const std::string path = write_temp(bad, "io_cli_bad.json");
    std::string err;
    CHECK(run_cli({"spectrum", "--config", path}, nullptr, &err) == 1);
  }

  SUBCASE("capacity exits 2") {
    Json big = base_config();
    big["model"]["n_max"] = 50;
    big["model"]["modes"] =
        Json::array({Json{{"omega", 1.0}, {"g", 0.1}}, Json{{"omega", 1.1}, {"g", 0.1}},
                     Json{{"omega", 1.2}, {"g", 0.1}}});
    const std::string path = write_temp(big, "io_cli_big.json");
    std::string err;
    CHECK(run_cli({"spectrum", "--config", path}, nullptr, &err) == 2);
    CHECK(err.find("capacity") != std::string::npos);
  }

  SUBCASE("numerical singularity exits 3") {
    // self-consistent shift 2 lambda g = omega makes the second-order
    // denominator vanish at zero occupation
    Json singular = base_config();
    singular["model"]["lambda"] = 0.5;
    singular["model"]["modes"][0]["g"] = 1.0;
    const std::string path = write_temp(singular, "io_cli_singular.json");
    std::string err;
    CHECK(run_cli({"df-check", "--config", path, "--order", "order1"}, nullptr, &err) == 3);
  }

  SUBCASE("cli misuse exits 1") {
    std::string err;
    CHECK(run_cli({"not-a-command", "--config", cfg}, nullptr, &err) == 1);
    CHECK(run_cli({}, nullptr, &err) == 1);
  }

  SUBCASE("env capacity override") {
    setenv("SUBDYN_MAX_DIM", "4", 1);
    std::string err;
    CHECK(run_cli({"spectrum", "--config", cfg}, nullptr, &err) == 2);
    setenv("SUBDYN_MAX_DIM", "junk", 1);
    CHECK(run_cli({"spectrum", "--config", cfg}, nullptr, &err) == 1);
    unsetenv("SUBDYN_MAX_DIM");
    CHECK(run_cli({"spectrum", "--config", cfg}) == 0);
  }
}

TEST_CASE("cli commands produce reports") {
  const std::string cfg = write_temp(base_config(), "io_cli_config2.json");

  for (const std::string command :
       {"subdyn", "gates", "correct", "fidelity", "df-check", "triangulate", "liouville"}) {
    std::string text;
    std::string err;
    const int code = run_cli({command, "--config", cfg}, &text, &err);
    CAPTURE(command);
    CAPTURE(err);
    CHECK(code == 0);
    CHECK(text.find("\"results\"") != std::string::npos);
  }

  SUBCASE("order1 flag") {
    std::string text;
    CHECK(run_cli({"subdyn", "--config", cfg, "--order", "order1"}, &text) == 0);
    CHECK(text.find("\"order\": \"order1\"") != std::string::npos);
  }

  SUBCASE("sweep over lambda") {
    std::string text;
    const int code =
        run_cli({"sweep", "spectrum", "--config", cfg, "--sweep", "lambda=0.0:0.1:3"}, &text);
    CHECK(code == 0);
    const Json report = Json::parse(text);
    CHECK(report.at("results").at("points").size() == 3);
    CHECK(report.at("results").at("parameter") == "lambda");
  }

  SUBCASE("sweep over the cutoff") {
    std::string text;
    const int code =
        run_cli({"sweep", "spectrum", "--config", cfg, "--sweep", "n_max=1:2:2"}, &text);
    CHECK(code == 0);
    const Json report = Json::parse(text);
    CHECK(report.at("results").at("points").size() == 2);
  }

  SUBCASE("bad sweep spec") {
    std::string err;
    CHECK(run_cli({"sweep", "spectrum", "--config", cfg, "--sweep", "omega=1:2:2"}, nullptr,
                  &err) == 1);
    CHECK(run_cli({"sweep", "spectrum", "--config", cfg, "--sweep", "lambda=1:2"}, nullptr,
                  &err) == 1);
  }
}

TEST_CASE("zero coupling gives zero corrections through the cli") {
  Json j = base_config();
  j["model"]["lambda"] = 0.0;
  const std::string cfg = write_temp(j, "io_cli_zero.json");
  std::string text;
  REQUIRE(run_cli({"correct", "--config", cfg}, &text) == 0);
  const Json report = Json::parse(text);
  CHECK(report.at("results").at("uniform_delta_t").get<double>() == 0.0);
  for (const auto& row : report.at("results").at("rows"))
    CHECK(row.at("delta_t").get<double>() == 0.0);
}

TEST_CASE("constraint-satisfying couplings report a vanishing sum through the cli") {
  Json j = base_config();
  j["model"]["lambda"] = 0.1;
  j["model"]["n_max"] = 2;
  j["model"]["modes"] =
      Json::array({Json{{"omega", 1.0}, {"g", 1.0}}, Json{{"omega", 1.0}, {"g", 1.0}},
                   Json{{"omega", 1.0}, {"g", -0.5}}});
  j["order"] = "order1";
  const std::string cfg = write_temp(j, "io_cli_bv.json");
  std::string text;
  REQUIRE(run_cli({"df-check", "--config", cfg}, &text) == 0);
  const Json report = Json::parse(text);
  bool found = false;
  for (const auto& row : report.at("results").at("rows")) {
    if (row.at("occupations") != "0 1 2") continue;
    found = true;
    CHECK(std::abs(row.at("constraint")[0].get<double>()) < 1e-12);
    CHECK(std::abs(row.at("order2_per_mode")[0].get<double>()) < 1e-12);
  }
  CHECK(found);
}

TEST_CASE("cli output files are byte identical across runs") {
  const std::string cfg = write_temp(base_config(), "io_cli_config3.json");
  for (const std::string command : {"spectrum", "df-check", "fidelity"}) {
    const std::string path1 = temp_path("io_cli_out_a.json");
    const std::string path2 = temp_path("io_cli_out_b.json");
    REQUIRE(run_cli({command, "--config", cfg, "--out", path1}) == 0);
    REQUIRE(run_cli({command, "--config", cfg, "--out", path2}) == 0);
    CAPTURE(command);
    const std::string a = slurp(path1);
    CHECK(!a.empty());
    CHECK(a == slurp(path2));
  }
}
