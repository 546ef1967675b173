#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mira/errors.hpp"
#include "mira/graph.hpp"
#include "mira/linalg.hpp"

namespace mira {

enum class TaskFamily { Regression, Classification };

TaskFamily task_family_from_string(const std::string& name);
std::string to_string(TaskFamily f);

/// Per-client train/test split. Inputs are column-wise (dim x n); targets are
/// out_dim x n (one-hot columns for classification).
struct ClientDataset {
    Matrix x_train;
    Matrix y_train;
    Matrix x_test;
    Matrix y_test;

    int n_train() const { return static_cast<int>(x_train.cols()); }
    int n_test() const { return static_cast<int>(x_test.cols()); }
};

struct UniverseConfig {
    int clients = 20;       // K
    int clusters = 4;       // C
    int dim = 16;           // input dimension
    int out_dim = 1;        // regression outputs, or class count for classification
    TaskFamily family = TaskFamily::Regression;
    double intra_spread = 0.1;
    double inter_spread = 1.0;
    double noise_std = 0.1;
    int n_train = 40;
    int n_test = 200;
    double size_skew = 0.0; // >0: log-normal per-client train sizes around n_train
};

/// Clustered ground truth: cluster centers ~ N(0, inter_spread^2), client
/// truths = own cluster center + N(0, intra_spread^2). truths[k] has length
/// out_dim*dim and acts row-major as the out_dim x dim map behind client k's
/// targets.
struct TaskUniverse {
    UniverseConfig config;
    std::vector<int> assignment;  // client -> cluster, round-robin
    std::vector<Vector> truths;   // per-client theta_k

    int client_count() const { return static_cast<int>(truths.size()); }
};

/// Deterministic in (config, seed): same inputs give bitwise-identical output.
std::pair<TaskUniverse, std::vector<ClientDataset>> generate_universe(const UniverseConfig& config,
                                                                      std::uint64_t seed);

/// a_kl = exp(-||theta_k - theta_l||^2 / scale), zero diagonal. Always passes
/// graph validation: symmetric by construction and entries in (0, 1].
TaskGraph similarity_from_truth(const TaskUniverse& universe, double scale);

/// One CSV per split: header row, then one sample per row, 17 significant digits.
void write_dataset_csv(const ClientDataset& data, int client_id, const std::string& directory);

} // namespace mira
