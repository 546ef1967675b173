#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mira/config.hpp"
#include "mira/experiment.hpp"
#include "mira/graph.hpp"
#include "mira/selfcheck.hpp"

namespace {

int cmd_run(const std::string& path) {
    mira::ExperimentConfig cfg;
    try {
        cfg = mira::load_config_file(path);
    } catch (const mira::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        const mira::ExperimentResult result = mira::run_experiment(cfg);
        for (const mira::StrategyRun& run : result.runs) {
            const mira::RoundReport& last = run.reports.back();
            std::printf("%-10s  J %.6g  mean train %.6g  mean test %.6g  up %llu bytes\n",
                        mira::to_string(run.kind).c_str(), last.objective, last.mean_train_loss(),
                        last.mean_test_loss(), static_cast<unsigned long long>(last.cum_up_bytes));
        }
        std::cout << "reports written to " << cfg.output_dir << "\n";
        return 0;
    } catch (const mira::RunError& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 3;
    } catch (const mira::NonFiniteLoss& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 3;
    } catch (const mira::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_grad_check(const mira::GradCheckOptions& options) {
    const mira::GradCheckReport report = mira::run_grad_check(options);
    for (const mira::GradCheckCombo& combo : report.combos) {
        std::printf("head=%-12s activation=%-4s  max rel err %.3e  (worst seed %llu, index %d)\n",
                    mira::to_string(combo.head).c_str(), mira::to_string(combo.activation).c_str(),
                    combo.max_rel_error, static_cast<unsigned long long>(combo.worst_seed),
                    combo.worst_index);
    }
    std::printf("max relative error %.3e, tolerance %.1e: %s\n", report.max_rel_error,
                options.tolerance, report.passed ? "PASS" : "FAIL");
    return report.passed ? 0 : 1;
}

int cmd_oracle_check(const mira::OracleCheckOptions& options) {
    const mira::OracleCheckReport report = mira::run_oracle_check(options);
    const mira::OracleProperty* first_failure = nullptr;
    for (const mira::OracleProperty& property : report.properties) {
        std::printf("%s  %s (%s)\n", property.passed ? "PASS" : "FAIL", property.name.c_str(),
                    property.detail.c_str());
        if (!property.passed && !first_failure) first_failure = &property;
    }
    if (first_failure) {
        std::cerr << "first failing property: " << first_failure->name << "\n";
        return 1;
    }
    return 0;
}

int cmd_validate_graph(const std::string& path) {
    try {
        const mira::TaskGraph graph = mira::read_graph_file(path);
        std::printf("clients: %d\n", graph.client_count());
        std::printf("symmetric, non-negative, zero diagonal: yes\n");
        std::printf("degree range: [%.6g, %.6g]\n", graph.degrees().minCoeff(),
                    graph.degrees().maxCoeff());
        if (mira::is_connected(graph)) {
            std::printf("connected: yes\n");
        } else {
            std::printf("connected: NO (isolated clients receive no regularization pull)\n");
        }
        try {
            std::printf("safe eta*lambda bound: %.6g\n", mira::safe_step_bound(graph));
        } catch (const mira::ZeroDegreeGraph&) {
            std::printf("safe eta*lambda bound: none (all weights zero)\n");
        }
        return 0;
    } catch (const mira::Error& e) {
        std::cerr << "invalid graph: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated multi-task LoRA fine-tuning simulator with graph-regularized aggregation"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* run_cmd = app.add_subcommand("run", "Run the configured experiment and write reports");
    run_cmd->add_option("config", config_path, "config file path")->required();

    mira::GradCheckOptions grad_options;
    CLI::App* grad_cmd =
        app.add_subcommand("grad-check", "Finite-difference check of the analytic backward pass");
    grad_cmd->add_option("--seeds", grad_options.seeds_per_combo, "seeds per head/activation combo");
    grad_cmd->add_option("--tolerance", grad_options.tolerance, "max relative error allowed");
    grad_cmd->add_flag("--inject-fault", grad_options.inject_fault,
                       "sign-flip one gradient block; the check must then fail");

    mira::OracleCheckOptions oracle_options;
    CLI::App* oracle_cmd =
        app.add_subcommand("oracle-check", "Aggregation and Laplacian property suite");
    oracle_cmd->add_option("--trials", oracle_options.trials, "random trials per property");
    oracle_cmd->add_option("--seed", oracle_options.seed, "suite seed");
    oracle_cmd->add_flag("--force-unsafe-step", oracle_options.force_unsafe_step,
                         "drive eta*lambda past the spectral limit; the contraction "
                         "property must then report a violation");

    std::string graph_path;
    CLI::App* graph_cmd = app.add_subcommand("validate-graph", "Check a graph file's invariants");
    graph_cmd->add_option("path", graph_path, "graph file path")->required();

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) return cmd_run(config_path);
    if (grad_cmd->parsed()) return cmd_grad_check(grad_options);
    if (oracle_cmd->parsed()) return cmd_oracle_check(oracle_options);
    if (graph_cmd->parsed()) return cmd_validate_graph(graph_path);
    return 0;
}
