#include "hsav_cli/config.hpp"
#include "hsav_cli/run.hpp"

#include "hsav/error.hpp"
#include "hsav/field_io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace {

using namespace hsav;
using namespace hsav::cli;
namespace fs = std::filesystem;

const char* kBase = R"(experiment = single
method = gauss2
dt = 0.01
t_end = 0.05

[model]
name = cahn_hilliard
lambda = 0.1
eps = 0.25

[grid]
nx = 16
ny = 16
lx = 2pi
ly = 2pi

[initial]
kind = random
amp = 0.3
seed = 5

[output]
directory = out
)";

RunConfig parse(const std::string& text, std::vector<std::string> overrides = {}) {
    std::istringstream in(text);
    return parse_config(in, overrides);
}

std::string config_error(const std::string& text, std::vector<std::string> overrides = {}) {
    try {
        parse(text, std::move(overrides));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "no error";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class CliRun : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("hsav_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    RunConfig config(std::vector<std::string> overrides = {}) {
        overrides.push_back("output.directory=" + (root_ / "out").string());
        return parse(kBase, overrides);
    }

    fs::path root_;
};

int run_tool(const std::string& args) {
    const std::string cmd = std::string(HSAV_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(CliConfig, ParsesAndResolves) {
    const RunConfig c = parse(kBase);
    EXPECT_EQ(c.experiment, Experiment::single);
    EXPECT_EQ(*c.method, Method::gauss(2));
    EXPECT_DOUBLE_EQ(*c.dt, 0.01);
    EXPECT_NEAR(c.grid.lx(), 2.0 * 3.141592653589793, 1e-15);
    EXPECT_EQ(c.seed(), 5u);
    const auto& p = std::get<CahnHilliardParams>(c.model);
    EXPECT_DOUBLE_EQ(p.eps, 0.25);
    EXPECT_DOUBLE_EQ(p.gamma0, 1.0);

    // The resolved dump parses back to the same configuration.
    const std::string text = resolved_config(c);
    EXPECT_EQ(resolved_config(parse(text)), text);
}

TEST(CliConfig, OverridesApplyBeforeValidation) {
    const RunConfig c = parse(kBase, {"dt=0.1", "method=gauss3", "model.eps=0.5"});
    EXPECT_DOUBLE_EQ(*c.dt, 0.1);
    EXPECT_EQ(*c.method, Method::gauss(3));
    EXPECT_DOUBLE_EQ(std::get<CahnHilliardParams>(c.model).eps, 0.5);
    EXPECT_NE(config_error(kBase, {"dt"}).find("key=value"), std::string::npos);
}

TEST(CliConfig, NamedViolations) {
    std::string no_dt = kBase;
    no_dt.erase(no_dt.find("dt = 0.01\n"), 10);
    EXPECT_NE(config_error(no_dt).find("'dt'"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"dt=-1"}).find("dt: must be > 0"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"method=gauss11"}).find("[1, 10]"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"model.lamda=1"}).find("model.lamda: unknown key"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"model.eps2=1"}).find("does not apply"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"colour=red"}).find("colour"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"grid.nx=15"}).find("grid"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"model.eps=0"}).find("model"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"solver.mode=newton"}).find("solver.mode"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"experiment=disk"}).find("allen_cahn"), std::string::npos);
    EXPECT_NE(config_error(kBase, {"experiment=refinement", "refinement.dt_list=0.01,0.03"}).find("refinement.dt_list"),
              std::string::npos);
    EXPECT_NE(config_error("experiment = single\n[model\n").find("syntax"), std::string::npos);
}

TEST_F(CliRun, WritesOutputsAndManifest) {
    const RunSummary s = run_experiment(config({"output.snapshot_stride=2"}), {false, true, 1});
    const fs::path dir = root_ / "out";
    EXPECT_TRUE(fs::exists(dir / kManifestName));
    EXPECT_TRUE(fs::exists(dir / "energy.csv"));
    EXPECT_TRUE(fs::exists(dir / "final.bin"));
    EXPECT_TRUE(fs::exists(dir / "final.csv"));
    EXPECT_TRUE(fs::exists(dir / "phi_00000004.bin"));
    for (const auto& f : s.files) EXPECT_EQ(fs::file_size(dir / f.name), f.bytes) << f.name;

    const std::string csv = slurp(dir / "energy.csv");
    EXPECT_EQ(csv.rfind("# manifest: config_hash=", 0), 0u);
    EXPECT_NE(csv.find("seed=5"), std::string::npos);
    const std::string manifest = slurp(dir / kManifestName);
    EXPECT_NE(manifest.find("\"status\": \"ok\""), std::string::npos);
    EXPECT_EQ(read_snapshot(dir / "final.bin").grid().nx(), 16u);
}

TEST_F(CliRun, RefusesToOverwriteWithoutForce) {
    run_experiment(config());
    EXPECT_THROW(run_experiment(config()), IoError);
    EXPECT_NO_THROW(run_experiment(config(), {true, false, 1}));
}

TEST_F(CliRun, DeterministicOutputs) {
    run_experiment(config());
    const std::string first = slurp(root_ / "out" / "energy.csv");
    run_experiment(config(), {true, false, 1});
    EXPECT_EQ(slurp(root_ / "out" / "energy.csv"), first);
}

TEST_F(CliRun, FailedRunLeavesFailedManifest) {
    EXPECT_THROW(run_experiment(config({"solver.max_iterations=1", "solver.newton_fallback=false"})), NumericalError);
    EXPECT_TRUE(fs::exists(root_ / "out" / kFailedManifestName));
    EXPECT_FALSE(fs::exists(root_ / "out" / kManifestName));
    EXPECT_NE(slurp(root_ / "out" / "energy.csv").find("# failure:"), std::string::npos);
    EXPECT_THROW(run_experiment(config()), IoError);
}

TEST_F(CliRun, OutputRootEnvironment) {
    RunConfig c = parse(kBase);
    ::setenv(kOutputRootEnv, root_.c_str(), 1);
    EXPECT_EQ(resolve_output_directory(c), root_ / "out");
    ::unsetenv(kOutputRootEnv);
    EXPECT_EQ(resolve_output_directory(c), fs::path("out"));
}

TEST_F(CliRun, SweepAndRefinementFiles) {
    run_experiment(config({"experiment=energy_sweep", "sweep.methods=gauss1,cn", "sweep.dt_list=0.025,0.01"}));
    EXPECT_TRUE(fs::exists(root_ / "out" / "energy_gauss1_dt0.025.csv"));
    EXPECT_TRUE(fs::exists(root_ / "out" / "energy_cn_dt0.01.csv"));
    run_experiment(config({"experiment=refinement", "refinement.dt_list=0.025,0.0125,0.00625"}), {true, false, 2});
    const std::string csv = slurp(root_ / "out" / "convergence.csv");
    EXPECT_NE(csv.find("dt,error,order"), std::string::npos);
}

TEST_F(CliRun, ExitCodes) {
    const fs::path cfg = root_ / "run.cfg";
    std::ofstream(cfg) << kBase;
    const std::string dir = "--set output.directory=" + (root_ / "exit").string();
    EXPECT_EQ(run_tool("validate " + cfg.string()), 0);
    EXPECT_EQ(run_tool("validate " + cfg.string() + " --set dt=-1"), 1);
    EXPECT_EQ(run_tool("run " + (root_ / "missing.cfg").string()), 1);
    EXPECT_EQ(run_tool("run " + cfg.string() + " " + dir +
                       " --set solver.max_iterations=1 --set solver.newton_fallback=false"),
              2);
    EXPECT_EQ(run_tool("run " + cfg.string() + " " + dir), 3);
    EXPECT_EQ(run_tool("run " + cfg.string() + " " + dir + " --force"), 0);
    EXPECT_EQ(run_tool("tableau 3"), 0);
}
