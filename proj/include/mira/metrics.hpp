#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mira/client.hpp"
#include "mira/graph.hpp"

namespace mira {

enum class StrategyKind; // server.hpp

struct ClientMetric {
    int id = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
};

/// One communication round's record. Byte counters are cumulative.
struct RoundReport {
    int round = 0;
    double objective = 0.0;  // J = F + lambda * R
    double global_loss = 0.0; // F: sum of client train losses
    double reg_value = 0.0;   // R: Laplacian regularizer over the delta vectors
    std::vector<ClientMetric> per_client;
    std::vector<int> sampled;
    std::uint64_t cum_up_bytes = 0;
    std::uint64_t cum_down_bytes = 0;

    double mean_train_loss() const;
    double mean_test_loss() const;
};

struct ObjectiveValue {
    double objective = 0.0;
    double global_loss = 0.0;
    double reg_value = 0.0;
};

/// J, F, R from precomputed train losses and delta vectors.
ObjectiveValue objective_from_parts(const std::vector<double>& train_losses,
                                    const std::vector<Vector>& deltas, const TaskGraph& graph,
                                    double lambda);

/// Evaluates every client and assembles the objective decomposition.
ObjectiveValue objective(const std::vector<ClientState>& clients, const TaskGraph& graph, double lambda);

/// Per-round transport in bytes, (up, down): each sampled client uploads its
/// delta and downloads one, 8 bytes per parameter. local_only moves nothing.
std::pair<std::uint64_t, std::uint64_t> round_comm_cost(const AdaptedModel& model, int sampled_count,
                                                        StrategyKind kind);

struct CostModel {
    std::uint64_t bytes_per_param = 8;
    std::uint64_t optimizer_overhead = 0; // zero for plain SGD
};

/// Memory footprint split into frozen base, trainable adapter, and optimizer
/// state; total is their sum.
struct MemoryCost {
    std::uint64_t base_bytes = 0;
    std::uint64_t adapter_bytes = 0;
    std::uint64_t optimizer_bytes = 0;
    std::uint64_t total() const { return base_bytes + adapter_bytes + optimizer_bytes; }
};

MemoryCost memory_cost(const AdaptedModel& model, const CostModel& cost_model);

/// Round CSV: t,J,F,R_value,mean_train,mean_test,up_bytes,down_bytes.
void write_rounds_csv(const std::vector<RoundReport>& reports, const std::string& path);

/// Per-client CSV: t,client,train_loss,test_loss,sampled_flag.
void write_clients_csv(const std::vector<RoundReport>& reports, const std::string& path);

} // namespace mira
