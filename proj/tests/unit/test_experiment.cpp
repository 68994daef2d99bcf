#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qpfk/experiment/runner.hpp"
#include "qpfk/experiment/spec.hpp"

using namespace qpfk;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::path(testing::TempDir()) / ("qpfk_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string schema_path(const json& j, std::optional<ExperimentKind> k = std::nullopt) {
  try {
    parse_spec(j, k);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<accepted>";
}

json sweep_spec() {
  return json::parse(R"({"kind": "lambda_sweep", "seed": 3,
    "params": {"delta": 1.0, "lambdas": [0.0, 0.5, 1.0], "boxes": [{"L": 3, "T": 1.0}], "n_samples": 2000}})");
}

json coarse_spec() {
  return json::parse(R"({"kind": "coarse_order", "seed": 5,
    "system": {"kind": "rotation", "frequency": "golden"},
    "sampling": {"kind": "stretched", "zeros": [0.0], "xi": 2.0},
    "theta": 0.1234,
    "params": {"lambda": 1.0, "tau": 1.3, "extent": [6, 6], "L": 20, "replicates": 12}})");
}

}  // namespace

TEST(Spec, KindResolution) {
  EXPECT_EQ(parse_spec(json::object(), ExperimentKind::calibration).kind, ExperimentKind::calibration);
  EXPECT_EQ(schema_path(json::object()), "kind");
  EXPECT_EQ(schema_path({{"kind", "nope"}}), "kind");
  EXPECT_EQ(schema_path({{"kind", "calibration"}}, ExperimentKind::lambda_sweep), "kind");
  EXPECT_EQ(schema_path(json::array()), "");
}

TEST(Spec, FieldPathsInErrors) {
  auto j = coarse_spec();
  j["params"]["lambda"] = -1.0;
  EXPECT_EQ(schema_path(j), "params.lambda");
  j = coarse_spec();
  j.erase("system");
  EXPECT_EQ(schema_path(j), "system");
  j = json{{"kind", "calibration"}, {"params", {{"t", 2.0}, {"T", 1.0}}}};
  EXPECT_EQ(schema_path(j), "params.t");
  j = sweep_spec();
  j["params"]["lambdas"] = {1.0, 0.5};
  EXPECT_NE(schema_path(j), "<accepted>");
  EXPECT_EQ(schema_path(j).rfind("params", 0), 0u);
}

TEST(Spec, MessagesNameThePath) {
  auto j = coarse_spec();
  j["params"]["lambda"] = -1.0;
  try {
    parse_spec(j);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("params.lambda"), std::string::npos);
  }
}

TEST(Spec, HashIsStableAndKeyOrderFree) {
  const auto a = json::parse(R"({"seed": 1, "kind": "calibration"})");
  const auto b = json::parse(R"({"kind": "calibration", "seed": 1})");
  EXPECT_EQ(spec_hash(a), spec_hash(b));
  EXPECT_NE(spec_hash(a), spec_hash(json::parse(R"({"kind": "calibration", "seed": 2})")));
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Spec, SeedOverride) {
  EXPECT_EQ(parse_spec(sweep_spec()).seed, 3u);
  EXPECT_EQ(parse_spec(sweep_spec(), std::nullopt, 99).seed, 99u);
}

TEST(Spec, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(QPFK_CONFIG_DIR)) {
    std::ifstream f(e.path());
    const auto j = json::parse(f);
    if (e.path().filename().string().rfind("invalid", 0) == 0)
      EXPECT_THROW(parse_spec(j), SchemaError) << e.path();
    else
      EXPECT_NO_THROW(parse_spec(j)) << e.path();
  }
}

TEST(Runner, CalibrationWritesOutputsAndManifest) {
  const auto dir = scratch("calibration");
  auto j = json::parse(R"({"kind": "calibration", "seed": 7, "params": {"n_samples": 20000}})");
  const auto res = run_experiment(parse_spec(j), {dir, 1, nullptr});
  EXPECT_FALSE(res.truncated);
  ASSERT_TRUE(fs::exists(dir / "calibration.csv"));
  const auto m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["kind"], "calibration");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["spec_hash"], spec_hash(j));
  EXPECT_EQ(m["truncated"], false);
  EXPECT_EQ(m["version"], kVersion);
  for (const auto& c : res.summary["checks"]) EXPECT_TRUE(c["pass"].get<bool>()) << c.dump();
}

TEST(Runner, SweepCsvIndependentOfWorkers) {
  const auto spec = parse_spec(sweep_spec());
  std::string first;
  for (unsigned w : {1u, 4u, 8u}) {
    const auto dir = scratch("sweep_" + std::to_string(w));
    run_experiment(spec, {dir, w, nullptr});
    const auto csv = slurp(dir / "sweep.csv");
    if (first.empty())
      first = csv;
    else
      EXPECT_EQ(csv, first) << "workers " << w;
  }
  EXPECT_FALSE(first.empty());
}

TEST(Runner, CoarseCsvIndependentOfWorkers) {
  const auto spec = parse_spec(coarse_spec());
  const auto a = scratch("coarse_1"), b = scratch("coarse_4");
  run_experiment(spec, {a, 1, nullptr});
  run_experiment(spec, {b, 4, nullptr});
  EXPECT_EQ(slurp(a / "coarse_runs.csv"), slurp(b / "coarse_runs.csv"));
  EXPECT_EQ(slurp(a / "coarse_lattice.csv"), slurp(b / "coarse_lattice.csv"));
}

TEST(Runner, StopFlagMarksTruncation) {
  const std::atomic<bool> stop{true};
  for (const auto& spec : {parse_spec(sweep_spec()), parse_spec(coarse_spec())}) {
    const auto dir = scratch(std::string("stop_") + to_string(spec.kind));
    const auto res = run_experiment(spec, {dir, 1, &stop});
    EXPECT_TRUE(res.truncated);
    const auto m = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["truncated"], true);
    bool marked = false;
    for (const auto& name : res.outputs)
      if (name.ends_with(".csv")) {
        const auto body = slurp(dir / name);
        marked |= body.ends_with("# truncated\n");
      }
    EXPECT_TRUE(marked) << to_string(spec.kind);
  }
}

TEST(Runner, RecurrenceTable) {
  const auto dir = scratch("recurrence");
  const auto j = json::parse(R"({"kind": "recurrence", "system": {"kind": "rotation", "frequency": "golden"}, "params": {"k_max": 200}})");
  run_experiment(parse_spec(j), {dir, 1, nullptr});
  const auto csv = slurp(dir / "recurrence.csv");
  EXPECT_GT(std::count(csv.begin(), csv.end(), '\n'), 10);
}
