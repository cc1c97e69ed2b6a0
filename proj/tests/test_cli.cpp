// End-to-end checks of the command-line driver: file outputs, determinism,
// exit codes. The binary path comes from the ADIAPHASE_CLI_BIN environment
// variable set by ctest.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("ADIAPHASE_CLI_BIN");
    REQUIRE(p != nullptr);
    return p;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::path("cli_scratch") / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("simulate with zero coupling: the deviation column is flat zero") {
    const auto dir = fresh_dir("w0zero");
    const int rc = run_cli("simulate --w0 0 --T 50 --steps 500 --out " + dir.string(),
                           dir / "log.txt");
    CHECK(rc == 0);
    std::ifstream csv(dir / "phases_50.csv");
    REQUIRE(csv.good());
    std::string line;
    std::getline(csv, line);  // header
    int rows = 0;
    while (std::getline(csv, line)) {
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        REQUIRE(vals.size() == 11);
        CHECK(std::abs(vals[5]) <= 1e-12);  // re deviation
        CHECK(std::abs(vals[6]) <= 1e-12);  // im deviation
        ++rows;
    }
    CHECK(rows == 501);
}

TEST_CASE("identical spec and seed give byte-identical outputs") {
    const auto d1 = fresh_dir("det1");
    const auto d2 = fresh_dir("det2");
    const std::string args = "simulate --w0 1 --T 80 --steps 600 --seed 77 --out ";
    CHECK(run_cli(args + d1.string(), d1 / "log.txt") == 0);
    CHECK(run_cli(args + d2.string(), d2 / "log.txt") == 0);
    for (const char* f : {"trajectory_80.csv", "phases_80.csv", "report.json"})
        CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("consistency audit exits 0 on the default pulse") {
    const auto dir = fresh_dir("cons");
    const int rc = run_cli("consistency --w0 1 --T 100 --steps 1000 --out " + dir.string(),
                           dir / "log.txt");
    CHECK(rc == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
    for (const auto& c : rep["checks"]) CHECK(c["pass"].get<bool>());
}

TEST_CASE("corrupted lambda_eff trips the compensation check with exit 1") {
    const auto dir = fresh_dir("corrupt");
    const int rc = run_cli("consistency --w0 1 --T 100 --steps 500 --corrupt-lambda-eff "
                           "--out " + dir.string(),
                           dir / "log.txt");
    CHECK(rc == 1);
    const std::string log = slurp(dir / "log.txt");
    CHECK(log.find("FAIL compensation_identity") != std::string::npos);
    CHECK(log.find("first failing check: compensation_identity") != std::string::npos);
}

TEST_CASE("hermitian model is flagged as the selfadjoint reduction") {
    const auto dir = fresh_dir("herm");
    write_file(dir / "model.cfg",
               "kind = matrix_table\n"
               "dim = 2\n"
               "entry.0.0 = 1 0\n"
               "entry.0.1 = 0.3 0\n"
               "entry.1.0 = 0.3 0\n"
               "entry.1.1 = -1 0\n");
    const int rc = run_cli("consistency --model " + (dir / "model.cfg").string() +
                               " --T 50 --steps 500 --out " + dir.string(),
                           dir / "log.txt");
    CHECK(rc == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(rep["selfadjoint_reduction"].get<bool>());
    bool saw = false;
    for (const auto& c : rep["checks"])
        if (c["name"] == "deviation_selfadjoint_zero") {
            saw = true;
            CHECK(c["pass"].get<bool>());
            CHECK(c["measured"].get<double>() <= 1e-12);
            CHECK(c["note"] == "selfadjoint reduction");
        }
    CHECK(saw);
}

TEST_CASE("exit code 2 on parse errors and gain models") {
    const auto dir = fresh_dir("parse");
    write_file(dir / "bad.cfg", "kind = two_level_pulse\ndim = 2\nwat = 1\n");
    CHECK(run_cli("simulate --model " + (dir / "bad.cfg").string() + " --out " +
                      dir.string(),
                  dir / "log.txt") == 2);
    write_file(dir / "gain.cfg",
               "kind = matrix_table\ndim = 2\nentry.1.1 = 0 0.5\n");
    CHECK(run_cli("simulate --model " + (dir / "gain.cfg").string() + " --out " +
                      dir.string(),
                  dir / "log2.txt") == 2);
    CHECK(run_cli("simulate --T 0 --out " + dir.string(), dir / "log3.txt") == 2);
}

TEST_CASE("exit code 3 on degenerate spectra") {
    const auto dir = fresh_dir("degen");
    write_file(dir / "degen.cfg",
               "kind = matrix_table\n"
               "dim = 2\n"
               "entry.0.0 = 1 0\n"
               "entry.1.1 = 1.0000000000001 0\n");
    CHECK(run_cli("simulate --model " + (dir / "degen.cfg").string() + " --T 10 --out " +
                      dir.string(),
                  dir / "log.txt") == 3);
}

TEST_CASE("tscan on a constant hamiltonian sits at the integrator floor") {
    const auto dir = fresh_dir("tscan_const");
    write_file(dir / "const.cfg",
               "kind = matrix_table\n"
               "dim = 2\n"
               "entry.0.0 = 0.7 0\n"
               "entry.0.1 = 0.1 0\n"
               "entry.1.0 = 0.1 0\n"
               "entry.1.1 = -0.2 -0.5\n");
    const int rc = run_cli("tscan --model " + (dir / "const.cfg").string() +
                               " --T 50,100 --steps 500 --out " + dir.string(),
                           dir / "log.txt");
    CHECK(rc == 0);  // ratio verdicts below the noise floor are not failures
    std::ifstream csv(dir / "tscan.csv");
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        REQUIRE(vals.size() == 6);
        for (std::size_t i = 1; i <= 3; ++i) CHECK(vals[i] < 1e-7);
    }
}

TEST_CASE("w0 scan emits tagged per-record files and ordered peaks") {
    const auto dir = fresh_dir("scan");
    const int rc = run_cli(
        "simulate --T 60 --steps 500 --w0-list 1,2 --out " + dir.string(),
        dir / "log.txt");
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "w0_1_trajectory_60.csv"));
    CHECK(fs::exists(dir / "w0_2_trajectory_60.csv"));
    CHECK(fs::exists(dir / "w0_1_phases_60.csv"));
    const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
    REQUIRE(rep["records"].size() == 2);
    CHECK(rep["records"][0]["deviation_sup"].get<double>() >
          rep["records"][1]["deviation_sup"].get<double>());
}

TEST_CASE("scan results do not depend on the worker-pool size") {
    const auto d1 = fresh_dir("pool1");
    const auto dn = fresh_dir("pooln");
    const std::string args = "simulate --T 60,120 --steps 400 --w0-list 1,2 --seed 9 --out ";
    const std::string env1 = "ADIAPHASE_THREADS=1 ";
    const int r1 = std::system((env1 + cli_path() + " " + args + d1.string() +
                                " > /dev/null 2>&1").c_str());
    const int rn = std::system((cli_path() + " " + args + dn.string() +
                                " > /dev/null 2>&1").c_str());
    REQUIRE(WEXITSTATUS(r1) == 0);
    REQUIRE(WEXITSTATUS(rn) == 0);
    CHECK(slurp(d1 / "report.json") == slurp(dn / "report.json"));
    CHECK(slurp(d1 / "w0_2_trajectory_120.csv") == slurp(dn / "w0_2_trajectory_120.csv"));
}
