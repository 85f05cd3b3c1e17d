#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cachenet/errors.hpp"
#include "cachenet/experiment.hpp"
#include "doctest.h"

using namespace cachenet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cachenet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

ExperimentSpec tiny_sim_spec() {
  auto spec = spec_from_json(nlohmann::json::parse(R"({
    "sim": {"area_side_m": 2500, "deployments": 2, "slots": 150, "warmup": 50, "threads": 1}
  })"));
  return spec;
}

template <typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("empty config gives the reference scenario") {
  const auto spec = spec_from_json(nlohmann::json::object());
  const Scenario d;
  CHECK(spec.network.user_intensity == d.user_intensity);
  CHECK(spec.network.bs_intensity == d.bs_intensity);
  CHECK(spec.network.cache_slots == 10);
  CHECK(spec.network.catalog_size == 200);
  CHECK(spec.network.alpha == 0.25);
  CHECK_FALSE(spec.network.noise_figure_db.has_value());
  CHECK(spec.sim.seed == 1);
  CHECK(spec.sweep.key.empty());
  CHECK(spec.averaging == AveragingConvention::AllRequests);
  const auto p = make_network_params(spec.network);
  CHECK(p.tx_power == doctest::Approx(19.952623149688797).epsilon(1e-15));
  CHECK(p.noise_power == 0.0);
  CHECK(p.user_intensity / p.bs_intensity == doctest::Approx(100.0));

  // An empty config file behaves the same.
  const auto dir = scratch("empty");
  write(dir / "empty.json", "");
  CHECK(parse_config(dir / "empty.json").network.alpha == 0.25);
}

TEST_CASE("alpha = 0 is the baseline network") {
  auto spec = spec_from_json(nlohmann::json::parse(R"({"network": {"alpha": 0}})"));
  const auto rows = cmd_analyze(spec);
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].plr_cache.has_value());
  CHECK(rows[0].avg_plr_all == rows[0].plr_untenable);
  CHECK(rows[0].p_full == doctest::Approx(0.59077373869946027654).epsilon(1e-12));
  const std::string csv = to_csv(rows, RowKind::Analytic);
  // plr_cache is the 8th column; it must be present but empty.
  const auto line = csv.substr(csv.find('\n') + 1);
  int commas = 0;
  std::size_t pos = 0;
  for (; pos < line.size() && commas < 7; ++pos)
    if (line[pos] == ',') ++commas;
  CHECK(line[pos] == ',');
}

TEST_CASE("validation errors carry the field path") {
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"network": {"cache_slots": 201}})")), ValidationError);
  CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"network": {"cache_slots": 201}})")); })
            .find("cache_slots") != std::string::npos);
  CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"network": {"tx_power_w": 20}})")); })
            .find("network.tx_power_w") != std::string::npos);
  CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"network": {"tx_power_w": 20}})")); })
            .find("tx_power_dbm") != std::string::npos);
  CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"network": {"tx_power_dbm": "43 dBm"}})")); })
            .find("plain number") != std::string::npos);
  CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"network": {"bandwidth_mhz": 20}})")); })
            .find("bandwidth_hz") != std::string::npos);
  CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"sim": {"slots": -3}})")); }).find("sim.slots") !=
        std::string::npos);
  CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"alpha": 0.3})")); }).find("inside a section") !=
        std::string::npos);
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"network": {"colour": 1}})")), ValidationError);
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"sim": {"edge": "mirror"}})")), ValidationError);
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"output": {"format": "xml"}})")), ValidationError);
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"sweep": {"key": "cache_slots"}})")), ValidationError);
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"sweep": {"key": "cache_slots", "values": [5, 2.5]}})")),
                  ValidationError);
  CHECK(error_of([] {
          spec_from_json(nlohmann::json::parse(R"({"sweep": {"key": "cache_slots", "values": [10, 250]}})"));
        }).find("cache_slots=250") != std::string::npos);
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"network": {"alpha": 1.5}})")), ValidationError);
}

TEST_CASE("flags win over --set, which wins over the file") {
  const auto dir = scratch("flags");
  write(dir / "cfg.json", R"({"network": {"alpha": 0.3, "cache_slots": 5},
                              "sim": {"seed": 5, "cancellation": true},
                              "output": {"dir": "from_file"}})");
  CliOverrides flags;
  flags.sets = {"alpha=0.1", "sim.seed=6", "output.dir=from_set"};
  flags.seed = 9;
  flags.no_cancellation = true;
  flags.noise_figure_db = 7.0;
  flags.edge = "guard";
  flags.format = "json";
  const auto spec = parse_config(dir / "cfg.json", flags);
  CHECK(spec.network.alpha == 0.1);
  CHECK(spec.network.cache_slots == 5);
  CHECK(spec.sim.seed == 9);
  CHECK_FALSE(spec.sim.cancellation);
  CHECK(spec.network.noise_figure_db == 7.0);
  CHECK(spec.sim.edge == sim::EdgeMode::Guard);
  CHECK(spec.format == OutputFormat::Json);
  CHECK(spec.out_dir == "from_set");

  CliOverrides sweep;
  sweep.sets = {"sweep.key=cache_slots", "sweep.values=0,5,10"};
  const auto s2 = parse_config(std::nullopt, sweep);
  CHECK(s2.sweep.values == std::vector<double>{0, 5, 10});

  CliOverrides bad;
  bad.sets = {"alpha"};
  CHECK_THROWS_AS(parse_config(std::nullopt, bad), ValidationError);
  bad.sets = {"nosuch=1"};
  CHECK_THROWS_AS(parse_config(std::nullopt, bad), ValidationError);
  CHECK_THROWS_AS(parse_config(dir / "missing.json"), IoError);
  write(dir / "broken.json", "{\"network\": ");
  CHECK_THROWS_AS(parse_config(dir / "broken.json"), ValidationError);
}

TEST_CASE("spec_to_json round-trips through spec_from_json") {
  auto spec = spec_from_json(nlohmann::json::parse(
      R"({"network": {"alpha": 0.4, "noise_figure_db": 3}, "sweep": {"key": "alpha", "values": [0, 0.5]},
          "sim": {"edge": "guard", "seed": 18446744073709551615}})"));
  const auto again = spec_from_json(spec_to_json(spec));
  CHECK(spec_to_json(again) == spec_to_json(spec));
  CHECK(again.sim.seed == 18446744073709551615ULL);
}

TEST_CASE("sweep over cache size: one row per value and dominance") {
  auto spec = spec_from_json(
      nlohmann::json::parse(R"({"sweep": {"key": "cache_slots", "values": [0, 5, 10, 15, 20]}})"));
  const auto rows = cmd_analyze(spec);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].sweep_key == "cache_slots=0");
  CHECK(rows[2].sweep_key == "cache_slots=10");
  for (const auto& r : rows) {
    REQUIRE(r.plr_cache.has_value());
    CHECK(*r.plr_cache <= *r.plr_untenable);
  }
  CHECK(*rows[0].plr_cache == doctest::Approx(*rows[0].plr_untenable).epsilon(1e-12));
  CHECK(*rows[2].plr_untenable == doctest::Approx(0.41976424059406263259).epsilon(1e-9));
  CHECK(*rows[2].plr_cache == doctest::Approx(0.33818525425664932876).epsilon(1e-9));
}

TEST_CASE("CSV header order and number formatting") {
  const auto a = csv_header(RowKind::Analytic);
  const std::vector<std::string> want = {"sweep_key", "p_full", "p_free", "p_modest", "phi_a",
                                         "t_bar", "plr_untenable", "plr_cache", "avg_plr_air", "avg_plr_all"};
  CHECK(a == want);
  const auto s = csv_header(RowKind::Simulated);
  CHECK(std::equal(want.begin(), want.end(), s.begin()));
  CHECK(s[10] == "se_p_full");
  CHECK(s[s.size() - 3] == "seed");
  CHECK(s[s.size() - 2] == "deployments");
  CHECK(s.back() == "slots");

  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1");
  const double third = 1.0 / 3.0;
  CHECK(std::stod(format_number(third)) == third);
}

TEST_CASE("empty row set gives a header-only CSV") {
  const auto text = to_csv({}, RowKind::Analytic);
  CHECK(text == "sweep_key,p_full,p_free,p_modest,phi_a,t_bar,plr_untenable,plr_cache,avg_plr_air,avg_plr_all\n");
  CHECK(parse_csv(text, RowKind::Analytic).empty());
  const auto dir = scratch("empty_rows");
  const auto files = emit_results({}, RowKind::Simulated, OutputFormat::Csv, dir, "simulated_default");
  REQUIRE(files.size() == 1);
  CHECK(slurp(files[0]) == to_csv({}, RowKind::Simulated));
}

TEST_CASE("CSV round trip preserves every value exactly") {
  auto spec = spec_from_json(nlohmann::json::parse(R"({"sweep": {"key": "alpha", "values": [0, 0.25, 0.7]}})"));
  const auto rows = cmd_analyze(spec);
  const auto back = parse_csv(to_csv(rows, RowKind::Analytic), RowKind::Analytic);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].sweep_key == rows[i].sweep_key);
    CHECK(back[i].p_full == rows[i].p_full);
    CHECK(back[i].p_free == rows[i].p_free);
    CHECK(back[i].p_modest == rows[i].p_modest);
    CHECK(back[i].phi_a == rows[i].phi_a);
    CHECK(back[i].t_bar == rows[i].t_bar);
    CHECK(back[i].plr_untenable == rows[i].plr_untenable);
    CHECK(back[i].plr_cache == rows[i].plr_cache);
    CHECK(back[i].avg_plr_air == rows[i].avg_plr_air);
    CHECK(back[i].avg_plr_all == rows[i].avg_plr_all);
  }

  const auto sim_rows = cmd_simulate(tiny_sim_spec());
  const auto sim_back = parse_csv(to_csv(sim_rows, RowKind::Simulated), RowKind::Simulated);
  REQUIRE(sim_back.size() == 1);
  CHECK(to_csv(sim_back, RowKind::Simulated) == to_csv(sim_rows, RowKind::Simulated));
  CHECK(sim_back[0].sim->se_p_free == sim_rows[0].sim->se_p_free);
  CHECK(sim_back[0].sim->deployments == 2);
  CHECK(sim_back[0].sim->slots == 150);
  CHECK(sim_back[0].sim->seed == 1);

  CHECK_THROWS_AS(parse_csv("nope\n", RowKind::Analytic), ValidationError);
}

TEST_CASE("emit_results writes one file per mode, with optional JSON mirror") {
  const auto dir = scratch("emit") / "nested";
  auto spec = spec_from_json(nlohmann::json::parse(R"({"sweep": {"key": "cache_slots", "values": [5, 15]}})"));
  spec.format = OutputFormat::Json;
  spec.out_dir = dir;
  const auto files = run_command("analyze", spec);
  REQUIRE(files.size() == 2);
  CHECK(files[0] == dir / "analytic_cache_slots.csv");
  CHECK(files[1] == dir / "analytic_cache_slots.json");
  const auto j = nlohmann::json::parse(slurp(files[1]));
  CHECK(j["rows"].size() == 2);
  CHECK(j["rows"][1]["sweep_key"] == "cache_slots=15");
  CHECK(j["rows"][1]["plr_cache"].get<double>() ==
        parse_csv(slurp(files[0]), RowKind::Analytic)[1].plr_cache.value());

  // An output "directory" that is a regular file is an I/O error.
  write(dir / "blocker", "x");
  spec.out_dir = dir / "blocker";
  try {
    run_command("analyze", spec);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("blocker") != std::string::npos);
    CHECK(exit_code_for(e) == 3);
  }
}

TEST_CASE("simulate output is byte-identical for a fixed seed") {
  auto spec = tiny_sim_spec();
  spec.out_dir = scratch("det_a");
  const auto a = run_command("simulate", spec);
  spec.out_dir = scratch("det_b");
  const auto b = run_command("simulate", spec);
  REQUIRE(a.size() == 1);
  CHECK(slurp(a[0]) == slurp(b[0]));
  spec.sim.seed = 2;
  spec.out_dir = scratch("det_c");
  CHECK(slurp(run_command("simulate", spec)[0]) != slurp(a[0]));
}

TEST_CASE("compare keeps the analytic rows and summarises deviations") {
  auto spec = tiny_sim_spec();
  const auto c = cmd_compare(spec);
  const auto standalone = cmd_analyze(spec);
  REQUIRE(c.analytic.size() == 1);
  CHECK(to_csv(c.analytic, RowKind::Analytic) == to_csv(standalone, RowKind::Analytic));
  REQUIRE(c.simulated.size() == 1);
  CHECK(c.deviations.size() == 8);
  for (const auto& d : c.deviations) {
    CHECK(d.max_abs_deviation >= 0.0);
    CHECK(d.at == "default");
  }
  REQUIRE(c.reductions.size() == 1);
  CHECK(c.reductions[0].second > 0.0);

  spec.out_dir = scratch("compare");
  const auto files = run_command("compare", spec);
  CHECK(files.size() == 4);
  const auto summary = slurp(spec.out_dir / "compare_summary_default.csv");
  CHECK(summary.rfind("metric,sweep_key,value\n", 0) == 0);
  CHECK(summary.find("max_abs_dev_p_full,default,") != std::string::npos);
}

TEST_CASE("loss reduction at M = 5 and M = 15 is 9.80% and 15.46%") {
  for (auto [m, want] : {std::pair{5, 0.0980}, std::pair{15, 0.1546}}) {
    auto spec = spec_from_json(nlohmann::json::parse("{\"network\": {\"cache_slots\": " + std::to_string(m) + "}}"));
    spec.sim.deployments = 1;
    const auto base_spec = spec_from_json(nlohmann::json::parse("{\"network\": {\"alpha\": 0}}"));
    const double with = *cmd_analyze(spec)[0].avg_plr_all;
    const double without = *cmd_analyze(base_spec)[0].avg_plr_all;
    CAPTURE(m);
    CHECK(std::fabs((1.0 - with / without) - want) <= 0.01);
  }
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ValidationError("x")) == 1);
  CHECK(exit_code_for(DegenerateInputError("x")) == 1);
  CHECK(exit_code_for(DomainError("x")) == 2);
  CHECK(exit_code_for(ConvergenceError("x")) == 2);
  CHECK(exit_code_for(QuadratureError("x", 0.0, 1.0)) == 2);
  CHECK(exit_code_for(StabilityError("x")) == 2);
  CHECK(exit_code_for(IoError("x")) == 3);
  CHECK_THROWS_AS(run_command("plot", spec_from_json(nlohmann::json::object())), ValidationError);
}
