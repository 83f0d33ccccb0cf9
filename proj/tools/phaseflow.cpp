// phaseflow: experiment driver for the phase-space determinant functionals.
//   phaseflow run <config.json>       execute one experiment
//   phaseflow validate <config.json>  check a config without running it
//   phaseflow catalog                 list symbols, weights and generator bases

#include <CLI11.hpp>
#include <iostream>

#include "phaseflow/experiments.hpp"

using namespace phaseflow;

namespace {

void print_catalog() {
    std::cout << "symbols:\n";
    for (const char* name :
         {"constant_one", "elliptic_gauss(c)", "ring_zero", "ring_zero_pow2",
          "shifted_ring(b)", "torus_codim2", "graph_codim2",
          "oscillator_quadratic(mu1,mu2,gamma,delta)",
          "relative (composite: base, reference, z_re, z_im)"})
        std::cout << "  " << name << "\n";
    std::cout << "weights (manifold.phi):\n";
    for (const char* name : {"zero", "quad:s", "gaussbump:s,a,c"}) std::cout << "  " << name << "\n";
    std::cout << "generator bases:\n";
    for (const char* name :
         {"x<j>", "xi<j>", "bump:a,x0,xi0", "mono:k1,..,k2n", "monobump:a,k1,..,k2n"})
        std::cout << "  " << name << "\n";
    std::cout << "experiments:\n";
    for (const auto& name : experiment_names()) std::cout << "  " << name << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phase-space deformation functionals and determinant bounds"};
    app.require_subcommand(1);

    std::string config_path;
    int workers = 0;

    auto* run_cmd = app.add_subcommand("run", "execute one experiment from a JSON config");
    run_cmd->add_option("config", config_path, "experiment config")->required();
    run_cmd->add_option("--workers", workers, "worker thread count (PHASEFLOW_THREADS wins)");

    auto* val_cmd = app.add_subcommand("validate", "validate a config and list violations");
    val_cmd->add_option("config", config_path, "experiment config")->required();

    app.add_subcommand("catalog", "list built-in symbols, weights and bases");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("catalog")) {
            print_catalog();
            return 0;
        }
        auto cfg = ExperimentConfig::from_file(config_path);
        if (app.got_subcommand("validate")) {
            auto violations = validate(cfg);
            if (violations.empty()) {
                std::cout << "ok\n";
                return 0;
            }
            for (const auto& v : violations) std::cout << v << "\n";
            return 1;
        }
        if (workers > 0 && !std::getenv("PHASEFLOW_THREADS"))
            setenv("PHASEFLOW_THREADS", std::to_string(workers).c_str(), 0);
        int rc = run(cfg);
        std::cout << (rc == 0 ? "pass" : "FAIL") << "\n";
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
