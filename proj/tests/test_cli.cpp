#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "bssp/design.hpp"

#ifndef BSSP_CLI_PATH
#define BSSP_CLI_PATH ""
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(BSSP_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buf[4096];
    while (std::size_t got = fread(buf, 1, sizeof buf, pipe)) result.output.append(buf, got);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("bssp_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

}  // namespace

TEST_CASE("cli: help exits zero") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("design --help").exit_code == 0);
}

TEST_CASE("cli: unknown flags are rejected") {
    CHECK(run_cli("design gen --full 3 --no-such-flag").exit_code != 0);
}

TEST_CASE("cli: design gen + analyze round trip") {
    TempDir tmp;
    const auto design_path = (tmp.path / "d.txt").string();
    const RunResult gen = run_cli("design gen --full 3 --out " + design_path);
    CHECK(gen.exit_code == 0);
    CHECK(gen.output.find("config ") == 0);

    const bssp::Design d = bssp::read_design_file(design_path);
    CHECK(d.runs() == 8);
    CHECK(d.factors() == 3);

    const RunResult analyze = run_cli("design analyze " + design_path);
    CHECK(analyze.exit_code == 0);
    CHECK(analyze.output.find("\"resolution\": 4") != std::string::npos);
}

TEST_CASE("cli: the bundled template analyzes to resolution 5, strength 4") {
    TempDir tmp;
    const auto design_path = (tmp.path / "t.txt").string();
    CHECK(run_cli("design gen --reference-template --out " + design_path).exit_code == 0);
    const RunResult analyze = run_cli("design analyze " + design_path);
    CHECK(analyze.exit_code == 0);
    CHECK(analyze.output.find("\"resolution\": 5") != std::string::npos);
    CHECK(analyze.output.find("\"orthogonal_strength\": 4") != std::string::npos);
}

TEST_CASE("cli: malformed design files fail with a nonzero exit") {
    TempDir tmp;
    const auto bad = tmp.path / "bad.txt";
    std::ofstream(bad) << "2 2 pm1\n1 1\n1\n";  // ragged
    const RunResult analyze = run_cli("design analyze " + bad.string());
    CHECK(analyze.exit_code != 0);
    CHECK(analyze.output.find("error io:") != std::string::npos);
}

TEST_CASE("cli: subsample on template-complete data reports psi 0") {
    TempDir tmp;
    const auto design_path = (tmp.path / "t.txt").string();
    REQUIRE(run_cli("design gen --reference-template --out " + design_path).exit_code == 0);

    // data = the template itself, outcome all zero
    const bssp::Design tmpl = bssp::reference_template_128();
    const auto data_path = tmp.path / "data.csv";
    {
        std::ofstream out(data_path);
        for (std::size_t j = 0; j < 10; ++j) out << "x" << (j + 1) << ',';
        out << "y\n";
        const auto x = tmpl.zero_one_view();
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t j = 0; j < 10; ++j) out << static_cast<int>(x(r, j)) << ',';
            out << "0\n";
        }
    }
    const auto prefix = (tmp.path / "sub").string();
    const RunResult sub = run_cli("subsample --data " + data_path.string() + " --design " + design_path +
                                  " --strategy exhaustive-lexicographic --budget 1 --out " + prefix);
    CHECK(sub.exit_code == 0);
    CHECK(sub.output.find("matched 128/128") != std::string::npos);
    CHECK(fs::exists(prefix + ".json"));
    CHECK(fs::exists(prefix + ".csv"));
    const std::string json_text = slurp(prefix + ".json");
    CHECK(json_text.find("\"psi\": 0.0") != std::string::npos);
}

TEST_CASE("cli: empty data csv fails cleanly") {
    TempDir tmp;
    const auto design_path = (tmp.path / "t.txt").string();
    REQUIRE(run_cli("design gen --full 2 --out " + design_path).exit_code == 0);
    const auto data_path = tmp.path / "empty.csv";
    std::ofstream(data_path) << "x1,x2,y\n";
    const RunResult sub =
        run_cli("subsample --data " + data_path.string() + " --design " + design_path + " --out " +
                (tmp.path / "s").string());
    CHECK(sub.exit_code != 0);
    CHECK(sub.output.find("error ingestion:") != std::string::npos);
}

TEST_CASE("cli: missing template file for the experiment fails cleanly") {
    const RunResult run =
        run_cli("experiment --task regression --methods bssp --template missing.txt --reps 1 --r-test 1.5 --r-test 2");
    CHECK(run.exit_code != 0);
    CHECK(run.output.find("error io:") != std::string::npos);
}

TEST_CASE("cli: tiny experiment writes report files deterministically") {
    TempDir tmp;
    const auto out1 = (tmp.path / "run1").string();
    const auto out2 = (tmp.path / "run2").string();
    const std::string common =
        "experiment --task regression --methods baseline --reps 1 --n 120 --r-test 1.5 --r-test 2 --seed 7 --lambda 0.01 --out ";
    CHECK(run_cli(common + out1).exit_code == 0);
    CHECK(run_cli(common + out2).exit_code == 0);
    CHECK(slurp(out1 + "/report.csv") == slurp(out2 + "/report.csv"));
    const std::string s1 = slurp(out1 + "/summary.json");
    std::string s2 = slurp(out2 + "/summary.json");
    // the out path is echoed inside the summary config; normalize it
    size_t pos;
    while ((pos = s2.find("run2")) != std::string::npos) s2.replace(pos, 4, "run1");
    CHECK(s1 == s2);
}
