#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spotcheck/config.hpp"
#include "spotcheck/harness.hpp"

using namespace spotcheck;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spotcheck_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

SuiteOptions small_oracle_suite(int count, Seed seed) {
  SuiteOptions o;
  o.count = count;
  o.blindspots_min = 1;
  o.blindspots_max = 1;
  o.master_seed = seed;
  o.write_images = false;
  o.splits = {400, 200, 600};
  return o;
}

BdmConfig fast_bdm() {
  BdmConfig b;
  b.planespot.reducer_config.epochs = 30;
  return b;
}

}  // namespace

TEST_CASE("suite generation respects ranges and is deterministic") {
  SuiteOptions o;
  o.count = 40;
  o.master_seed = 77;
  o.write_images = false;
  const auto dir_a = scratch("suite_a"), dir_b = scratch("suite_b");
  const auto a = generate_ec_suite(o, dir_a);
  const auto b = generate_ec_suite(o, dir_b);
  REQUIRE(a.size() == 40);
  for (const auto& ec : a) {
    const auto n = ec.dataset().rollable.size();
    CHECK((n >= 6 && n <= 8));
    CHECK((ec.blindspots.blindspots.size() >= 1 && ec.blindspots.blindspots.size() <= 3));
    for (const auto& bs : ec.blindspots.blindspots) CHECK((bs.triplets.size() >= 5 && bs.triplets.size() <= 7));
    CHECK(slurp(dir_a / ec.id / "manifest.json") == slurp(dir_b / ec.id / "manifest.json"));
    CHECK(slurp(dir_a / ec.id / "truth" / "test.json") == slurp(dir_b / ec.id / "truth" / "test.json"));
  }
  // Reload and re-validate.
  const auto back = load_ec(dir_a / a[3].id);
  CHECK(to_json(back) == to_json(a[3]));
  CHECK_NOTHROW(validate(back));
}

TEST_CASE("suite options are validated") {
  SuiteOptions o;
  o.blindspots_max = 4;
  CHECK_THROWS_AS(validate(o), Error);
  o = {};
  o.resolution = 60;
  CHECK_THROWS_AS(validate(o), Error);
}

TEST_CASE("run_ec on an oracle EC, determinism and truncation") {
  const auto ecs = generate_ec_suite(small_oracle_suite(2, 5), scratch("run_ec"));
  const auto cfg = fast_bdm();
  const auto a = run_ec(ecs[0], cfg);
  const auto b = run_ec(ecs[0], cfg);
  CHECK(a.report.discovery_rate >= 0.0);
  CHECK(a.report.discovery_rate <= 1.0);
  CHECK(a.report.hypothesis_count <= 10);
  CHECK(to_json(a, false).dump() == to_json(b, false).dump());
  CHECK(to_json(a.report).dump() == to_json(b.report).dump());
}

TEST_CASE("imported hypotheses with an unknown image id are rejected by name") {
  const auto dir = scratch("import");
  const auto ecs = generate_ec_suite(small_oracle_suite(1, 9), dir);
  const auto built = build_oracle(ecs[0]);
  const auto outputs = ec_test_outputs(ecs[0], *built.model);
  Json hyps = Json::array();
  hyps.push_back({{"rank", 1}, {"importance", 1.0}, {"image_ids", {outputs.image_ids[0], 987654321}}});
  write_json_file(hyps, (dir / "imported.json").string());
  BdmConfig cfg;
  cfg.name = "external";
  cfg.import_path = (dir / "imported.json").string();
  try {
    discover(ecs[0], outputs, cfg);
    FAIL("expected ImportFormatError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ImportFormatError);
    CHECK(std::string(e.what()).find("987654321") != std::string::npos);
  }
}

TEST_CASE("unverified ECs are refused") {
  auto ecs = generate_ec_suite(small_oracle_suite(1, 12), scratch("unverified"));
  auto ec = ecs[0];
  ec.verified = {false};
  const auto built = build_oracle(ec);
  CHECK_THROWS_AS(run_ec(ec, *built.model, fast_bdm()), Error);
}

TEST_CASE("sweep ranks by DR then FDR and keeps suites disjoint") {
  const auto tuning = generate_ec_suite(small_oracle_suite(2, 21), scratch("sweep_t"));
  auto cfg_a = fast_bdm();
  auto cfg_b = fast_bdm();
  cfg_b.planespot.weight = 0.0;
  cfg_b.name = "w0";
  const auto rows = sweep(tuning, {cfg_a});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].ec_count == 2);
  const auto both = sweep(tuning, {cfg_b, cfg_a});
  REQUIRE(both.size() == 2);
  CHECK(both[0].mean_dr >= both[1].mean_dr);
  CHECK_THROWS_AS(sweep(tuning, {cfg_a}, tuning), Error);
}

TEST_CASE("report tables group and aggregate records") {
  std::vector<RunRecord> records;
  auto make = [](std::string id, int m, std::vector<bool> covered, std::vector<int> triplets) {
    RunRecord r;
    r.ec_id = std::move(id);
    r.bdm_name = "planespot";
    r.config_hash = "0123456789abcdef";
    r.report.covered = covered;
    r.truth_sizes.assign(covered.size(), 10);
    double dr = 0;
    for (bool c : covered) dr += c;
    r.report.discovery_rate = dr / static_cast<double>(covered.size());
    if (dr > 0) r.report.false_discovery = FdrResult{0.0, 1};
    for (std::size_t i = 0; i < covered.size(); ++i) {
      BlindspotRecord b;
      b.ec_id = r.ec_id;
      b.blindspot_count = m;
      b.triplet_count = triplets[i];
      b.covered = covered[i];
      r.blindspot_records.push_back(b);
    }
    return r;
  };
  records.push_back(make("a", 1, {true}, {5}));
  records.push_back(make("b", 1, {false}, {6}));
  records.push_back(make("c", 2, {true, true}, {5, 7}));
  const auto t = report(records);
  CHECK(t.overall_csv.find("planespot@01234567,0.6667") != std::string::npos);
  CHECK(t.by_blindspot_count_csv.find(",1,0.5000") != std::string::npos);
  CHECK(t.by_blindspot_count_csv.find(",2,1.0000") != std::string::npos);
  CHECK(t.by_triplet_count_csv.find("triplets,5,1.0000") != std::string::npos);
  CHECK(t.by_triplet_count_csv.find("triplets,6,0.0000") != std::string::npos);
  // Failure fractions: per-EC average over uncovered truths, then over ECs.
  records[1].report.failures[0] = {0.0, 0.0, 0.5, 0.5};
  records[2].report.failures[0] = {1.0, 0.0, 0.0, 0.0};
  records[2].report.failures[1] = {0.0, 0.0, 0.0, 1.0};
  const auto f = report(records);
  CHECK(f.failures_csv.find("planespot@01234567,0.2500,0.0000,0.2500,0.5000,2") != std::string::npos);
  // No 3-blindspot ECs: that row is omitted rather than reported as zero.
  CHECK(t.by_blindspot_count_csv.find(",3,") == std::string::npos);
}

TEST_CASE("configuration parsing") {
  const auto cfg = parse_toml(R"(
[suite]
count = 3
blindspots = [1, 2]
model = "oracle"

[planespot]
weight = 0.05
reducer = "pca"

[metrics]
lambda_p = 0.5
)");
  const auto o = suite_options_from_json(cfg, 4);
  CHECK(o.count == 3);
  CHECK(o.blindspots_max == 2);
  const auto b = bdm_config_from_json(cfg);
  CHECK(b.planespot.weight == 0.05);
  CHECK(b.planespot.reducer == ReducerKind::Pca);
  CHECK(b.thresholds.lambda_p == 0.5);
  CHECK(bdm_config_from_json(to_json(b)).planespot.weight == 0.05);
  CHECK(config_hash(bdm_config_from_json(to_json(b))) == config_hash(b));

  CHECK_THROWS_AS(bdm_config_from_json(Json::parse(R"({"planespot": {"wieght": 1}})")), Error);
  CHECK_THROWS_AS(bdm_config_from_json(Json::parse(R"({"bogus": {}})")), Error);
  CHECK_THROWS_AS(bdm_config_from_json(Json::parse(R"({"metrics": {"lambda_p": 0}})")), Error);

  const auto grid = sweep_grid_from_json(Json::parse(R"({"sweep": {"weight": [0, 0.025], "k_max": [4, 8]}})"));
  CHECK(grid.size() == 4);
}
