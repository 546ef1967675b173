#include "mira/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

namespace mira {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ClientState> build_clients(const ExperimentConfig& cfg, const ModelSpec& spec,
                                       const std::vector<ClientDataset>& datasets) {
    std::vector<ClientState> clients;
    clients.reserve(datasets.size());
    for (std::size_t k = 0; k < datasets.size(); ++k) {
        AdaptedModel model =
            build_model(spec, cfg.seeds.base_weights_seed(), cfg.seeds.adapter_seed());
        clients.emplace_back(static_cast<int>(k), std::move(model), datasets[k],
                             cfg.seeds.client_stream_seed(static_cast<int>(k)), cfg.local_lr,
                             cfg.batch_size);
    }
    return clients;
}

json summary_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    json summary;
    summary["rounds"] = cfg.rounds;
    summary["clients"] = cfg.universe.clients;
    summary["lambda"] = cfg.lambda;
    summary["sample_fraction"] = cfg.sample_fraction;

    for (const StrategyRun& run : result.runs) {
        const std::string name = to_string(run.kind);
        const RoundReport& last = run.reports.back();
        summary["final_mean_test_loss"][name] = last.mean_test_loss();
        summary["final_mean_train_loss"][name] = last.mean_train_loss();
        summary["final_objective"][name] = last.objective;
        summary["cost"][name] = {
            {"cum_up_bytes", last.cum_up_bytes},
            {"cum_down_bytes", last.cum_down_bytes},
            {"memory_base_bytes", run.memory.base_bytes},
            {"memory_adapter_bytes", run.memory.adapter_bytes},
            {"memory_optimizer_bytes", run.memory.optimizer_bytes},
            {"memory_total_bytes", run.memory.total()},
        };
    }

    json per_client = json::array();
    for (int k = 0; k < result.universe.client_count(); ++k) {
        json row;
        row["client"] = k;
        row["cluster"] = result.universe.assignment[k];
        for (const StrategyRun& run : result.runs) {
            const std::string name = to_string(run.kind);
            const ClientMetric& metric = run.reports.back().per_client[k];
            row["train_loss"][name] = metric.train_loss;
            row["test_loss"][name] = metric.test_loss;
        }
        per_client.push_back(std::move(row));
    }
    summary["per_client"] = std::move(per_client);
    return summary;
}

} // namespace

TaskGraph build_graph(const ExperimentConfig& cfg, const TaskUniverse& universe) {
    switch (cfg.graph_mode) {
    case GraphMode::Truth:
        return similarity_from_truth(universe, cfg.similarity_scale);
    case GraphMode::Random:
        return random_task_graph(cfg.universe.clients, cfg.graph_density, cfg.seeds.graph_seed());
    default: {
        TaskGraph graph = read_graph_file(cfg.graph_file);
        if (graph.client_count() != cfg.universe.clients) {
            throw InvalidConfig("graph.file",
                                "graph has " + std::to_string(graph.client_count()) +
                                    " clients but tasks.clients = " +
                                    std::to_string(cfg.universe.clients));
        }
        return graph;
    }
    }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);

    auto [universe, datasets] = generate_universe(cfg.universe, cfg.seeds.data_seed());
    TaskGraph graph = build_graph(cfg, universe);

    if (!is_connected(graph)) {
        std::cerr << "warning: task graph is disconnected; isolated clients receive no"
                     " regularization pull\n";
    }
    const bool runs_mira = std::any_of(cfg.strategies.begin(), cfg.strategies.end(),
                                       [](StrategyKind k) { return k == StrategyKind::Mira; });
    if (runs_mira && cfg.lambda > 0.0) {
        try {
            const double bound = safe_step_bound(graph);
            if (cfg.eta * cfg.lambda > bound) {
                std::cerr << "warning: eta*lambda = " << cfg.eta * cfg.lambda
                          << " exceeds the safe step bound " << bound
                          << "; the regularizer may oscillate\n";
            }
        } catch (const ZeroDegreeGraph&) {
            std::cerr << "warning: all graph weights are zero; regularization is inert\n";
        }
    }

    fs::create_directories(cfg.output_dir);
    const std::string dir = cfg.output_dir;
    write_graph_file(graph, dir + "/graph.txt");
    write_effective_config(cfg, dir + "/effective_config.cfg");
    if (cfg.write_datasets) {
        for (std::size_t k = 0; k < datasets.size(); ++k) {
            write_dataset_csv(datasets[k], static_cast<int>(k), dir + "/datasets");
        }
    }

    const ModelSpec spec = cfg.model_spec();
    ExperimentResult result;
    result.universe = universe;

    for (StrategyKind kind : cfg.strategies) {
        std::vector<ClientState> clients = build_clients(cfg, spec, datasets);

        std::vector<Vector> deltas;
        std::vector<int> train_sizes;
        deltas.reserve(clients.size());
        train_sizes.reserve(clients.size());
        for (const ClientState& client : clients) {
            deltas.push_back(client.model().trainable_vector());
            train_sizes.push_back(client.train_size());
        }

        ServerState state{
            .round = 0,
            .deltas = std::move(deltas),
            .graph = graph,
            .strategy = AggregationStrategy{kind, cfg.eta, cfg.lambda},
            .sample_fraction = cfg.sample_fraction,
            .sampling_seed = cfg.seeds.sampling_seed(),
            .neighbor_mode = cfg.neighbor_mode,
            .train_sizes = std::move(train_sizes),
            .cum_up_bytes = 0,
            .cum_down_bytes = 0,
        };

        RunOptions options;
        options.parallel_clients = cfg.parallel_clients;
        std::vector<RoundReport> reports = run(cfg.rounds, cfg.local_steps, clients, state, options);

        const std::string name = to_string(kind);
        write_rounds_csv(reports, dir + "/" + name + "_rounds.csv");
        write_clients_csv(reports, dir + "/" + name + "_clients.csv");

        StrategyRun strategy_run;
        strategy_run.kind = kind;
        strategy_run.memory = memory_cost(clients[0].model(), CostModel{});
        strategy_run.reports = std::move(reports);
        result.runs.push_back(std::move(strategy_run));
    }

    std::ofstream out(dir + "/summary.json", std::ios::trunc);
    if (!out) throw InvalidConfig("output_dir", "cannot write summary.json");
    out << summary_json(cfg, result).dump(2) << "\n";
    return result;
}

} // namespace mira
