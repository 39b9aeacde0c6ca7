#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "lwvm/runner.hpp"

using namespace lwvm;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is, "test.ini");
}

int error_line(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

std::string error_text(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("lwvm-test-" + tag + "-" + std::to_string(::getpid()))) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("empty config gives the defaults") {
    const auto c = parse("");
    CHECK(c == RunConfig{});
    CHECK_NOTHROW(c.validate());
    CHECK(c.steps() == 20);
    CHECK(parse("# only a comment\n\n  ; another\n") == RunConfig{});
}

TEST_CASE("config values and sections") {
    const auto c = parse(
        "mode = simulate\nseed = 7\n[quadrature]\nsphere_order = 64  # finer\n[time]\ndt = 0.05\ntau = 1\n"
        "[data]\nprofile = ring\namplitude = 2\n[fields]\nsecond = false\n[tolerances]\nresidue = 1e-9\n");
    CHECK(c.mode == RunMode::simulate);
    CHECK(c.seed == 7);
    CHECK(c.sphere_order == 64);
    CHECK(c.steps() == 20);
    CHECK(c.profile == "ring");
    CHECK(c.profile_params.at("amplitude") == 2.0);
    CHECK_FALSE(c.field_second);
    CHECK(c.tol.residue == 1e-9);
}

TEST_CASE("config errors name the line") {
    CHECK(error_line("[time]\ndt = -1\n") == 2);
    CHECK(error_text("[time]\ndt = -1\n").find("time.dt") != std::string::npos);
    CHECK(error_line("seed = 1\n[grid]\nn = 16\nspacing = 0.1\n") == 4);
    CHECK(error_line("[nowhere]\n") == 1);
    CHECK(error_line("seed 1\n") == 1);
    CHECK(error_line("seed = 1\nseed = 2\n") == 2);
    CHECK(error_line("[grid]\nn = sixteen\n") == 2);
    CHECK(error_line("[grid]\nhalf_width = 1.2x\n") == 2);
    CHECK(error_line("\n[time]\ndt = 0.03\n") == 3);  // does not divide tau
    CHECK(error_line("[verify]\nv_max = 1\n") == 2);
    CHECK(error_line("[quadrature]\n\ntime_order = 3\n") == 3);
    CHECK(error_line("mode = plot\n") == 1);
    CHECK(error_line("[fields]\nsecond = maybe\n") == 2);
    CHECK(error_line("[tolerances]\neuler = 0\n") == 2);
    // profile parameters are checked by the profile
    CHECK(error_line("[data]\nprofile = gaussian-bump\nwidth = 3\n") == 2);
    CHECK(error_line("[data]\nprofile = nothing\n") == 2);
}

TEST_CASE("write_config round trip") {
    RunConfig c;
    c.mode = RunMode::fields;
    c.seed = 123456789012345ULL;
    c.sphere_order = 64;
    c.dt = 0.1 / 3.0;
    c.tau = 0.1;
    c.profile = "ring";
    c.profile_params = {{"amplitude", 0.3}, {"ring_radius", 0.4}};
    c.monitor_derivatives = true;
    c.tol.field_first = 2.5e-4;
    std::ostringstream os;
    write_config(os, c);
    CHECK(parse(os.str()) == c);
}

TEST_CASE("verify-kernels is deterministic and echoes the config") {
    TempDir a("vk-a"), b("vk-b");
    RunConfig c;
    c.velocities = 3;
    c.sphere_order = 64;
    c.out = a.path.string();
    const auto m = run(c);
    CHECK(m.failed() == 0);
    CHECK(m.passed() > 0);
    c.out = b.path.string();
    run(c);
    for (const char* f : {"manifest.json", "kernel_checks.csv"}) {
        CHECK(fs::exists(a.path / f));
        CHECK(slurp(a.path / f) == slurp(b.path / f));
    }
    CHECK(fs::exists(a.path / "timings.json"));
    const auto j = nlohmann::json::parse(slurp(a.path / "manifest.json"));
    CHECK(j["config"]["quadrature"]["sphere_order"] == 64);
    CHECK(j["mode"] == "verify-kernels");
    CHECK(j["failed"] == 0);
    CHECK_FALSE(j["config"].contains("out"));
}

TEST_CASE("simulate on zero data writes all-zero series, report reuses them") {
    TempDir d("sim"), r("rep");
    auto c = parse("mode = simulate\n[grid]\nn = 8\n[time]\ndt = 0.05\ntau = 0.1\n[quadrature]\nmomentum_order = 4\n"
                   "[data]\nprofile = zero\n[simulate]\nensemble_size = 4\n");
    c.out = d.path.string();
    const auto m = run(c);
    CHECK(m.failed() == 0);
    std::istringstream norms(slurp(d.path / "norms.csv"));
    std::string line;
    std::getline(norms, line);
    int rows = 0;
    while (std::getline(norms, line)) {
        ++rows;
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');  // time
        while (std::getline(cells, cell, ',')) CHECK(std::stod(cell) == 0.0);
    }
    CHECK(rows == 3);
    const auto status = nlohmann::json::parse(slurp(d.path / "continuation.json"));
    CHECK(status["status"] == "zero data");

    c.mode = RunMode::report;
    c.series = d.path.string();
    c.out = r.path.string();
    const auto rep = run(c);
    CHECK(rep.failed() == 0);
    CHECK(slurp(r.path / "continuation.json") == slurp(d.path / "continuation.json"));
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(r.path)) {
        ++files;
        CHECK(e.path().extension() == ".json");
    }
    CHECK(files == 3);  // continuation, manifest, timings
}

TEST_CASE("I/O failures carry the path") {
    TempDir d("io");
    fs::create_directories(d.path);
    RunConfig c;
    c.mode = RunMode::report;
    c.series = (d.path / "missing").string();
    c.out = (d.path / "out").string();
    try {
        run(c);
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("missing") != std::string::npos);
    }
    std::ofstream(d.path / "blocker") << "x";
    c.mode = RunMode::verify_kernels;
    c.velocities = 1;
    c.out = (d.path / "blocker" / "sub").string();
    CHECK_THROWS_AS(run(c), std::runtime_error);
    CHECK_THROWS_AS(load_config(d.path / "nope.ini"), std::runtime_error);
}
