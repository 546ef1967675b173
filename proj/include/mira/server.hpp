#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mira/client.hpp"
#include "mira/graph.hpp"
#include "mira/metrics.hpp"

namespace mira {

enum class StrategyKind { Mira, FedAvg, LocalOnly };

StrategyKind strategy_from_string(const std::string& name);
std::string to_string(StrategyKind k);

/// Which neighbors the regularization update sums over when only part of the
/// network is sampled: all neighbors with stored (stale) models, or just the
/// round's sampled set.
enum class NeighborMode { AllStale, SampledOnly };

NeighborMode neighbor_mode_from_string(const std::string& name);
std::string to_string(NeighborMode m);

struct AggregationStrategy {
    StrategyKind kind = StrategyKind::Mira;
    double eta = 1.0;    // server learning rate; used by mira only
    double lambda = 0.1; // regularization weight; used by mira only
};

/// Server-side orchestration state. `deltas` always holds the latest known
/// trainable vector for every client; non-sampled clients carry theirs forward
/// unchanged each round.
struct ServerState {
    int round = 0;
    std::vector<Vector> deltas;
    TaskGraph graph;
    AggregationStrategy strategy;
    double sample_fraction = 0.1;
    std::uint64_t sampling_seed = 0;
    NeighborMode neighbor_mode = NeighborMode::AllStale;
    std::vector<int> train_sizes;
    std::uint64_t cum_up_bytes = 0;
    std::uint64_t cum_down_bytes = 0;
};

/// Uniform sample without replacement of max(1, round(fraction*K)) clients,
/// ascending ids. Depends only on (sampling_seed, round).
std::vector<int> sample_clients(const ServerState& state);

/// Regularization update for the sampled set (keys of `fresh`):
///   new_k = fresh_k - eta*lambda * sum_l a_kl * (fresh_k - latest_l)
/// where latest_l is fresh_l for sampled l and the stored delta otherwise
/// (AllStale), or the sum skips non-sampled l (SampledOnly). Non-sampled
/// clients keep their stored delta. All reads happen before any write; with
/// eta*lambda == 0 the result is a bitwise copy of the inputs.
std::vector<Vector> mira_aggregate(const ServerState& state, const std::map<int, Vector>& fresh);

/// Mean of the fresh deltas weighted by train-set size; every client receives
/// the same averaged delta.
std::vector<Vector> fedavg_aggregate(const ServerState& state, const std::map<int, Vector>& fresh);

struct RunOptions {
    bool parallel_clients = false;
    std::function<void(const RoundReport&)> on_round; // optional per-round hook
};

/// Algorithm loop: per round, sample -> push latest deltas to sampled clients
/// -> local training -> aggregate per strategy -> evaluate and record.
/// local_only trains every client each round and never aggregates.
std::vector<RoundReport> run(int rounds, int local_steps, std::vector<ClientState>& clients,
                             ServerState& state, const RunOptions& options = {});

} // namespace mira
