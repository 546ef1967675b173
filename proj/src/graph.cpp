#include "mira/graph.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "mira/rng.hpp"

namespace mira {

TaskGraph::TaskGraph(Matrix weights) : weights_(std::move(weights)) {
    degrees_ = weights_.rowwise().sum();
}

TaskGraph new_task_graph(Matrix weights) {
    if (weights.rows() != weights.cols()) {
        throw DimensionMismatch("weight matrix must be square, got " + std::to_string(weights.rows()) +
                                "x" + std::to_string(weights.cols()));
    }
    const int k = static_cast<int>(weights.rows());
    if (k < 2) throw TooFewClients(k);

    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (!std::isfinite(weights(i, j))) {
                throw Error("non-finite weight at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    for (int i = 0; i < k; ++i) {
        if (weights(i, i) != 0.0) throw NonzeroDiagonal(i);
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (weights(i, j) < 0.0) throw NegativeWeight(i, j);
        }
    }
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            if (weights(i, j) != weights(j, i)) throw AsymmetricWeights(j, i);
        }
    }
    return TaskGraph(std::move(weights));
}

TaskGraph random_task_graph(int client_count, double density, std::uint64_t seed) {
    if (client_count < 2) throw TooFewClients(client_count);
    if (!(density > 0.0 && density <= 1.0)) {
        throw InvalidConfig("density", "must lie in (0, 1], got " + std::to_string(density));
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Matrix w = Matrix::Zero(client_count, client_count);
    for (int i = 0; i < client_count; ++i) {
        for (int j = i + 1; j < client_count; ++j) {
            if (unit(rng) <= density) {
                // (0,1]: flip so a draw of exactly 0 cannot create a kept zero edge
                double value = 1.0 - unit(rng);
                w(i, j) = value;
                w(j, i) = value;
            }
        }
    }
    return TaskGraph(std::move(w));
}

Matrix laplacian(const TaskGraph& g) {
    Matrix l = -g.weights();
    l.diagonal() = g.degrees();
    return l;
}

std::vector<Vector> apply_extended_laplacian(const TaskGraph& g, const std::vector<Vector>& stacked) {
    const int k = g.client_count();
    if (static_cast<int>(stacked.size()) != k) {
        throw DimensionMismatch("expected " + std::to_string(k) + " stacked vectors, got " +
                                std::to_string(stacked.size()));
    }
    const Eigen::Index p = stacked.empty() ? 0 : stacked[0].size();
    for (const Vector& v : stacked) {
        if (v.size() != p) throw DimensionMismatch("stacked vectors have unequal lengths");
    }

    std::vector<Vector> out(stacked.size());
    for (int i = 0; i < k; ++i) {
        Vector block = g.degree(i) * stacked[i];
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const double a = g.weight(i, j);
            if (a != 0.0) block.noalias() -= a * stacked[j];
        }
        out[i] = std::move(block);
    }
    return out;
}

double regularization_value(const TaskGraph& g, const std::vector<Vector>& stacked) {
    const int k = g.client_count();
    if (static_cast<int>(stacked.size()) != k) {
        throw DimensionMismatch("expected " + std::to_string(k) + " stacked vectors, got " +
                                std::to_string(stacked.size()));
    }
    const Eigen::Index p = stacked.empty() ? 0 : stacked[0].size();
    for (const Vector& v : stacked) {
        if (v.size() != p) throw DimensionMismatch("stacked vectors have unequal lengths");
    }

    // Each unordered pair once; equals half the ordered double sum for symmetric weights.
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double a = g.weight(i, j);
            if (a != 0.0) total += a * (stacked[i] - stacked[j]).squaredNorm();
        }
    }
    return total;
}

double safe_step_bound(const TaskGraph& g) {
    const double max_degree = g.degrees().maxCoeff();
    if (max_degree <= 0.0) throw ZeroDegreeGraph();
    return 1.0 / (2.0 * max_degree);
}

bool is_connected(const TaskGraph& g) {
    const int k = g.client_count();
    std::vector<char> seen(k, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < k; ++j) {
            if (!seen[j] && g.weight(i, j) > 0.0) {
                seen[j] = 1;
                ++reached;
                stack.push_back(j);
            }
        }
    }
    return reached == k;
}

TaskGraph read_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file: " + path);

    int k = 0;
    if (!(in >> k)) throw Error("graph file " + path + ": missing client count on first line");
    if (k < 2) throw TooFewClients(k);

    Matrix w(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (!(in >> w(i, j))) {
                throw Error("graph file " + path + ": expected " + std::to_string(k) + "x" +
                            std::to_string(k) + " entries, ran out at row " + std::to_string(i));
            }
        }
    }
    return new_task_graph(std::move(w));
}

void write_graph_file(const TaskGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write graph file: " + path);
    const int k = g.client_count();
    out << k << "\n";
    char buf[64];
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", g.weight(i, j));
            out << buf << (j + 1 == k ? "" : " ");
        }
        out << "\n";
    }
    if (!out) throw Error("failed while writing graph file: " + path);
}

} // namespace mira
