#pragma once

#include <vector>

#include "mira/config.hpp"
#include "mira/metrics.hpp"
#include "mira/server.hpp"
#include "mira/tasks.hpp"

namespace mira {

struct StrategyRun {
    StrategyKind kind = StrategyKind::Mira;
    std::vector<RoundReport> reports;
    MemoryCost memory;
};

struct ExperimentResult {
    TaskUniverse universe;
    std::vector<StrategyRun> runs;
};

/// Build the task graph the config asks for: truth-derived similarity, random,
/// or loaded from file (which must match the configured client count).
TaskGraph build_graph(const ExperimentConfig& cfg, const TaskUniverse& universe);

/// One full experiment: a single universe and graph, then every configured
/// strategy run from identical initial state (same seeds, same data). Writes
/// into cfg.output_dir: <strategy>_rounds.csv, <strategy>_clients.csv,
/// graph.txt, effective_config.cfg, summary.json, and per-client dataset CSVs
/// under datasets/ when enabled. Reruns with an equal config are byte-identical.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

} // namespace mira
