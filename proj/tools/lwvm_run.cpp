// lwvm-run <mode> [--config PATH] [--out DIR] [--seed N] [--threads N]
//
// exit status: 0 all checks passed, 1 some check over tolerance, 2 bad
// arguments, config or I/O errors.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "lwvm/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Relativistic Vlasov-Maxwell verification runs and simulations"};
    app.require_subcommand(1, 1);

    std::string config_path, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--out", out, "output directory (overrides the config)");
    app.add_option("--seed", seed, "random seed (overrides the config)");
    app.add_option("--threads", threads, "worker threads; default LWVM_THREADS or all cores")->check(CLI::NonNegativeNumber);
    app.fallthrough();
    for (const char* m : {"verify-kernels", "verify-identities", "fields", "simulate", "report"}) app.add_subcommand(m);
    app.get_subcommand("report")->description("recompute continuation.json from a recorded norms.csv");

    CLI11_PARSE(app, argc, argv);

    lwvm::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = lwvm::load_config(config_path);
        cfg.mode = lwvm::parse_mode(app.get_subcommands().front()->get_name());
        if (!out.empty()) cfg.out = out;
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "lwvm-run: " << e.what() << "\n";
        return 2;
    }

    lwvm::RunManifest m;
    try {
        m = lwvm::run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "lwvm-run: " << e.what() << "\n";
        return 2;
    }
    for (const auto& c : m.checks)
        std::printf("%-4s %-34s %.3e (tol %.1e)\n", c.pass ? "ok" : "FAIL", c.name.c_str(), c.value, c.tolerance);
    for (const auto& [phase, sec] : m.timings) std::printf("     %-34s %.2f s\n", phase.c_str(), sec);
    std::printf("%d passed, %d failed; artifacts in %s\n", m.passed(), m.failed(), cfg.out.c_str());
    return m.failed() == 0 ? 0 : 1;
}
