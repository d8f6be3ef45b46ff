#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int exit_code;
    std::string dir;
};

const std::string& work_dir() {
    static const std::string dir = [] {
        auto d = fs::temp_directory_path() / "pmtrap-cli-test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d.string();
    }();
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = "cd " + work_dir() + " && " + PMTRAP_CLI_PATH + " " + args +
                            " > cli_stdout.txt 2> cli_stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& rel) {
    std::ifstream in(fs::path(work_dir()) / rel);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& rel, const std::string& text) {
    std::ofstream out(fs::path(work_dir()) / rel);
    out << text;
}

}  // namespace

TEST_CASE("optics subcommand runs with defaults") {
    REQUIRE(run_cli("--resolution coarse optics") == 0);
    const auto csv = slurp("pmtrap-out/optics/optics.csv");
    CHECK(csv.find("theta_max_deg") != std::string::npos);
    CHECK(csv.find("0.9336") != std::string::npos);
    CHECK(slurp("pmtrap-out/optics/manifest.txt").find("command = optics") != std::string::npos);
}

TEST_CASE("bad configuration exits with code 2 and line diagnostics") {
    write_file("broken.conf", "rf_v2_volt = 819.2\nwhatever_key = 1\n");
    CHECK(run_cli("--config broken.conf optics") == 2);
    CHECK(slurp("cli_stderr.txt").find("broken.conf:2") != std::string::npos);
    CHECK(run_cli("--config missing.conf optics") == 2);
}

TEST_CASE("saddle outputs are byte-identical across cached reruns") {
    REQUIRE(run_cli("--resolution coarse saddle") == 0);
    const auto first = slurp("pmtrap-out/saddle/saddle.csv");
    REQUIRE(run_cli("--resolution coarse saddle") == 0);
    const auto second = slurp("pmtrap-out/saddle/saddle.csv");
    CHECK(first == second);
    CHECK(first.find("z_saddle_mm") != std::string::npos);
    // the cache directory holds the solved basis
    bool has_basis = false;
    for (const auto& e : fs::directory_iterator(fs::path(work_dir()) / "pmtrap-cache"))
        if (e.path().extension() == ".bin") has_basis = true;
    CHECK(has_basis);
}

TEST_CASE("align subcommand reproduces the least-norm correction") {
    write_file("scenario.txt", "edge 2down 1.0\nmode least_norm\nverify off\n");
    REQUIRE(run_cli("--resolution coarse align --scenario scenario.txt") == 0);
    const auto csv = slurp("pmtrap-out/align/alignment.csv");
    CHECK(csv.find("1.082") != std::string::npos);
    CHECK(csv.find("-0.699") != std::string::npos);
    CHECK(csv.find("-0.711") != std::string::npos);
}

TEST_CASE("scenario errors are configuration errors") {
    write_file("bad_scenario.txt", "edge 9up 1.0\n");
    CHECK(run_cli("--resolution coarse align --scenario bad_scenario.txt") == 2);
}

TEST_CASE("init writes a parseable template") {
    REQUIRE(run_cli("init template.conf") == 0);
    REQUIRE(run_cli("--config template.conf --resolution coarse optics") == 0);
}

TEST_CASE("quick paper-check reports the regression table") {
    // exit code 1 reflects the two known edge-slope deviations
    CHECK(run_cli("--resolution coarse paper-check --quick") == 1);
    const auto csv = slurp("pmtrap-out/paper-check/paper_check.csv");
    CHECK(csv.find("rf null position") != std::string::npos);
    CHECK(csv.find("pass") != std::string::npos);
    CHECK(csv.find("edge slope 3up") != std::string::npos);
    const auto out = slurp("cli_stdout.txt");
    CHECK(out.find("2 check(s) failed") != std::string::npos);
}

TEST_CASE("cache can be disabled") {
    fs::remove_all(fs::path(work_dir()) / "nocache-dir");
    REQUIRE(run_cli("--resolution coarse --no-cache --cache-dir nocache-dir solve") == 0);
    CHECK(slurp("cli_stdout.txt").find("cache disabled") != std::string::npos);
    CHECK_FALSE(fs::exists(fs::path(work_dir()) / "nocache-dir"));
}

TEST_CASE("trajectory emits csv with unit-labelled headers") {
    write_file("traj.conf", "trajectory_duration_us = 20\ntrajectory_start_x_mm = 0.05\n");
    REQUIRE(run_cli("--config traj.conf --resolution coarse trajectory") == 0);
    const auto csv = slurp("pmtrap-out/trajectory/trajectory.csv");
    CHECK(csv.rfind("t_us,x_mm,y_mm,z_mm", 0) == 0);
    CHECK(slurp("pmtrap-out/trajectory/spectrum.csv").find("frequency_khz") != std::string::npos);
}
