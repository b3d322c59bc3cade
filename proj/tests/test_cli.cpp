#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyperme/cli/bundle.hpp"
#include "hyperme/cli/commands.hpp"
#include "hyperme/cli/spec.hpp"

using namespace hyperme::cli;
namespace fs = std::filesystem;

namespace {

const std::string kTool = HYPERME_TOOL_PATH;
const std::string kSpecs = HYPERME_SPEC_DIR;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("hyperme_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args) {
    const fs::path out = dir_ / "stdout", err = dir_ / "stderr";
    const std::string cmd = kTool + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  std::string spec(const std::string& name) const { return kSpecs + "/" + name + ".json"; }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SolvePrintsBundle) {
  const Outcome r = run("solve --spec " + spec("two_state") + " --no-timings");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["command"], "solve");
  EXPECT_EQ(j["spec_name"], "two_state");
  EXPECT_FALSE(j.contains("timings"));
  EXPECT_NEAR(j["results"]["lambda"][0].get<double>(), -0.8472978603872036, 1e-12);
  EXPECT_EQ(j["tables"]["p0"]["columns"], (Json{"x", "p", "m", "dx"}));
}

TEST_F(Cli, OutputIsDeterministic) {
  const std::string args = "prior --spec " + spec("bernoulli") + " --no-timings";
  const Outcome a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, NumbersRoundTripExactly) {
  const Outcome r = run("solve --spec " + spec("three_state") + " --no-timings");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j.dump(2) + "\n", r.out);
}

TEST_F(Cli, CsvTables) {
  const Outcome r = run("fluct --spec " + spec("binomial_fluct") + " --format csv --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir_ / "binomial_fluct.pi_A.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "A,pi,scalar_density,S,sqrt_g");
  EXPECT_EQ(run("fluct --spec " + spec("binomial_fluct") + " --format csv").code, kExitSchema);
}

TEST_F(Cli, CheckPassesOnReferenceSpecs) {
  std::string args = "check --no-timings";
  for (const auto& e : fs::directory_iterator(kSpecs)) args += " --spec " + e.path().string();
  const Outcome r = run(args);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(Json::parse(r.out)["results"]["passed"].get<bool>());
}

TEST_F(Cli, FailingExpectationExitsOne) {
  const auto p = write("bad.json", R"({"schema_version": 1, "name": "bad", "space": {"generator": "two-state"},
    "observables": [{"name": "a", "builtin": "identity"}], "constraints": {"targets": [0.7]},
    "expect": {"entropy": 0.5, "tolerance": 1e-9}})");
  EXPECT_EQ(run("check --spec " + p.string()).code, kExitCheckFailed);
}

TEST_F(Cli, MalformedJsonExitsTwoWithPosition) {
  const auto p = write("broken.json", "{\n  \"name\": \"x\",\n  oops\n}");
  const Outcome r = run("solve --spec " + p.string());
  EXPECT_EQ(r.code, kExitParse);
  EXPECT_NE(r.err.find(":3:"), std::string::npos) << r.err;
}

TEST_F(Cli, SchemaErrorsExitThreeAndListPaths) {
  const auto p = write("schema.json", R"({"schema_version": 1, "name": "s", "space": {"generator": "k-state", "k": "five"},
    "observables": [{"name": "a", "builtin": "identity"}], "constraints": {"targets": [0.7]}, "extra": 1})");
  const Outcome r = run("solve --spec " + p.string());
  EXPECT_EQ(r.code, kExitSchema);
  EXPECT_NE(r.err.find("$.space.k"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("$.extra"), std::string::npos) << r.err;
  EXPECT_EQ(run("prior --spec " + spec("two_state")).code, kExitSchema);
  EXPECT_EQ(run("").code, kExitSchema);
  EXPECT_EQ(run("solve --spec " + spec("two_state") + " --bogus").code, kExitSchema);
}

TEST_F(Cli, InfeasibleTargetExitsFour) {
  const auto p = write("infeasible.json", R"({"schema_version": 1, "name": "inf", "space": {"generator": "two-state"},
    "observables": [{"name": "a", "builtin": "identity"}], "constraints": {"targets": [1.2]}})");
  const Outcome r = run("solve --spec " + p.string());
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.err.find("infeasible"), std::string::npos) << r.err;
}

TEST_F(Cli, IoFailuresExitFive) {
  EXPECT_EQ(run("solve --spec " + (dir_ / "missing.json").string()).code, kExitIo);
  EXPECT_EQ(run("solve --spec " + spec("two_state") + " --out /proc/nope").code, kExitIo);
}

TEST(Spec, ParseAndHash) {
  const std::string text = R"({"schema_version": 1, "name": "p", "space": {"generator": "k-state", "k": 4},
    "observables": [{"name": "a", "builtin": "identity"}], "constraints": {"targets": [1.5]}})";
  const ModelSpec s = parse_spec(text, "inline");
  EXPECT_EQ(s.name, "p");
  ASSERT_TRUE(s.targets.has_value());
  EXPECT_EQ(s.targets->front(), 1.5);
  EXPECT_EQ(s.hash, fnv1a(text));
  EXPECT_EQ(build_space(s.space)->size(), 4u);
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
}

TEST(Spec, WrongSchemaVersion) {
  try {
    parse_spec(R"({"schema_version": 2, "name": "p", "space": {"generator": "two-state"}, "observables": []})", "v");
    FAIL();
  } catch (const CliError& e) {
    EXPECT_EQ(e.exit_code(), kExitSchema);
  }
}

TEST(Bundle, TableWidthIsEnforced) {
  Table t{"t", {}, {}, {}};
  t.add_column("a", "1");
  EXPECT_THROW(t.add_row({1.0, 2.0}), std::logic_error);
  t.add_row({0.1});
  EXPECT_EQ(to_csv(t), "a\n0.10000000000000001\n");
}
