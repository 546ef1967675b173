#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mira/errors.hpp"
#include "mira/linalg.hpp"

namespace mira {

/// Symmetric weighted task-similarity graph over K clients.
///
/// Entry (k,l) of weights() is the similarity between the tasks of clients
/// k and l. Invariants (enforced at construction, immutable afterwards):
/// symmetric, non-negative, zero diagonal, K >= 2.
class TaskGraph {
public:
    int client_count() const { return static_cast<int>(weights_.rows()); }
    const Matrix& weights() const { return weights_; }
    double weight(int k, int l) const { return weights_(k, l); }

    /// Degree of client k: sum of its incident weights.
    double degree(int k) const { return degrees_(k); }
    const Vector& degrees() const { return degrees_; }

private:
    explicit TaskGraph(Matrix weights);

    friend TaskGraph new_task_graph(Matrix weights);
    friend TaskGraph random_task_graph(int client_count, double density, std::uint64_t seed);

    Matrix weights_;
    Vector degrees_;
};

/// Validate a weight matrix and wrap it. Throws TooFewClients, NonzeroDiagonal,
/// NegativeWeight, AsymmetricWeights or DimensionMismatch naming the offender.
TaskGraph new_task_graph(Matrix weights);

/// Random symmetric graph: each unordered pair is kept with probability
/// `density`, kept weights drawn uniformly from (0,1). Deterministic in seed.
TaskGraph random_task_graph(int client_count, double density, std::uint64_t seed);

/// L = D - M, dense.
Matrix laplacian(const TaskGraph& g);

/// Apply the block-extended Laplacian to K stacked parameter vectors without
/// materializing the Kp x Kp matrix: out_k = degree_k * v_k - sum_l a_kl * v_l.
std::vector<Vector> apply_extended_laplacian(const TaskGraph& g, const std::vector<Vector>& stacked);

/// 1/2 * sum_k sum_{l != k} a_kl * ||v_k - v_l||^2. Non-negative.
double regularization_value(const TaskGraph& g, const std::vector<Vector>& stacked);

/// Gershgorin step bound 1/(2 * max degree); any eta*lambda at or below it keeps
/// the regularizer non-increasing under the server step. Throws ZeroDegreeGraph.
double safe_step_bound(const TaskGraph& g);

/// True when every pair of clients is joined by a path of positive weights.
bool is_connected(const TaskGraph& g);

/// Plain-text matrix file: first line K, then K whitespace-separated rows.
TaskGraph read_graph_file(const std::string& path);
void write_graph_file(const TaskGraph& g, const std::string& path);

} // namespace mira
