#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mira/model.hpp"
#include "mira/rng.hpp"
#include "mira/server.hpp"
#include "mira/tasks.hpp"

namespace mira {

enum class GraphMode { Truth, Random, File };

GraphMode graph_mode_from_string(const std::string& name);
std::string to_string(GraphMode m);

/// Every stream seed defaults to a value derived from `master`; explicit
/// per-stream overrides pin a stream independently of the rest.
struct SeedConfig {
    std::uint64_t master = 1;
    std::optional<std::uint64_t> base_weights;
    std::optional<std::uint64_t> adapter;
    std::optional<std::uint64_t> data;
    std::optional<std::uint64_t> sampling;
    std::optional<std::uint64_t> graph;

    std::uint64_t base_weights_seed() const {
        return base_weights ? *base_weights : derive_seed(master, seed_tag::base_weights);
    }
    std::uint64_t adapter_seed() const {
        return adapter ? *adapter : derive_seed(master, seed_tag::adapter);
    }
    std::uint64_t data_seed() const { return data ? *data : derive_seed(master, seed_tag::data); }
    std::uint64_t sampling_seed() const {
        return sampling ? *sampling : derive_seed(master, seed_tag::sampling);
    }
    std::uint64_t graph_seed() const { return graph ? *graph : derive_seed(master, seed_tag::graph); }
    std::uint64_t client_stream_seed(int client) const {
        return derive_seed(master, seed_tag::client_stream, static_cast<std::uint64_t>(client));
    }
};

/// Fully-resolved run description. Field groups mirror the config file
/// sections; see `config_keys()` for the exhaustive key list.
struct ExperimentConfig {
    // [experiment]
    std::vector<StrategyKind> strategies{StrategyKind::Mira, StrategyKind::FedAvg,
                                         StrategyKind::LocalOnly};
    int rounds = 60;     // communication rounds T
    int local_steps = 5; // local optimizer steps R per sampled client per round
    bool parallel_clients = false;
    std::string output_dir = "out";
    bool write_datasets = false;

    // [server]
    double sample_fraction = 0.1;
    double eta = 1.0;
    double lambda = 0.1;
    NeighborMode neighbor_mode = NeighborMode::AllStale;

    // [model]
    std::vector<int> hidden_dims; // between the task input dim and out_dim
    int rank = 16;
    Activation activation = Activation::Tanh;
    std::optional<Head> head; // unset: follows the task family
    double init_scale = 0.02;
    double lora_scale = 1.0;

    // [client]
    double local_lr = 0.01;
    int batch_size = 8;

    // [tasks]
    // out_dim 16 keeps the default single-layer model wide enough for rank 16.
    UniverseConfig universe{.out_dim = 16};

    // [graph]
    GraphMode graph_mode = GraphMode::Truth;
    double graph_density = 0.5;     // random mode: edge keep probability
    double similarity_scale = 1.0;  // truth mode: exp(-dist^2/scale)
    std::string graph_file;         // file mode

    // [seeds]
    SeedConfig seeds;

    Head resolved_head() const;
    ModelSpec model_spec() const;
};

/// All recognized "section.key" names, in file order.
const std::vector<std::string>& config_keys();

/// Parse INI-style text: [section] headers, key = value lines, '#'/';' full-line
/// comments. Returns "section.key" -> raw value. Throws InvalidConfig on syntax
/// errors and duplicate keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Environment overrides: key "a.b_c" reads MIRA_A_B_C. Only recognized keys
/// are consulted.
std::map<std::string, std::string> env_overrides();

/// Defaults + entries -> validated config. Unknown keys are rejected.
ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries);

/// Module preconditions checked eagerly so bad configs fail before any run.
void validate_config(const ExperimentConfig& cfg);

/// File -> parse -> env overlay -> validated config.
ExperimentConfig load_config_file(const std::string& path);

/// Fully-resolved INI text; parses back to an equivalent config (seeds are
/// written resolved, so derived and explicit streams round-trip identically).
std::string render_config(const ExperimentConfig& cfg);

void write_effective_config(const ExperimentConfig& cfg, const std::string& path);

} // namespace mira
