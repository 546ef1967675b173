#include "mira/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mira/rng.hpp"

namespace mira {

TaskFamily task_family_from_string(const std::string& name) {
    if (name == "regression") return TaskFamily::Regression;
    if (name == "classification") return TaskFamily::Classification;
    throw InvalidConfig("family", "unknown task family '" + name + "'");
}

std::string to_string(TaskFamily f) {
    return f == TaskFamily::Regression ? "regression" : "classification";
}

namespace {

void validate(const UniverseConfig& c) {
    if (c.clusters < 1) throw InvalidConfig("clusters", "must be >= 1");
    if (c.clients < c.clusters) throw InvalidConfig("clients", "need at least one client per cluster");
    if (c.dim < 1) throw InvalidConfig("dim", "must be >= 1");
    if (c.out_dim < 1) throw InvalidConfig("out_dim", "must be >= 1");
    if (c.family == TaskFamily::Classification && c.out_dim < 2)
        throw InvalidConfig("out_dim", "classification needs at least 2 classes");
    if (c.intra_spread < 0 || c.inter_spread < 0) throw InvalidConfig("spread", "spreads must be >= 0");
    if (c.noise_std < 0) throw InvalidConfig("noise_std", "must be >= 0");
    if (c.n_train < 1 || c.n_test < 1) throw InvalidConfig("n_train/n_test", "counts must be >= 1");
    if (c.size_skew < 0) throw InvalidConfig("size_skew", "must be >= 0");
}

Matrix gaussian_matrix(int rows, int cols, double std_dev, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = std_dev * gauss(rng);
    }
    return m;
}

// Targets for inputs x under the client's truth map, plus per-entry noise.
// Classification: one-hot of the noisy argmax logit.
Matrix make_targets(const Vector& theta, const Matrix& x, const UniverseConfig& c, std::mt19937_64& rng) {
    Eigen::Map<const Matrix> theta_map(theta.data(), c.dim, c.out_dim); // column-major view of row-major map
    const Matrix logits = theta_map.transpose() * x;                    // out_dim x n
    std::normal_distribution<double> gauss(0.0, 1.0);

    Matrix y(c.out_dim, x.cols());
    if (c.family == TaskFamily::Regression) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) = logits(i, j) + c.noise_std * gauss(rng);
        }
        return y;
    }
    y.setZero();
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        Eigen::Index best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const double v = logits(i, j) + c.noise_std * gauss(rng);
            if (v > best_value) {
                best_value = v;
                best = i;
            }
        }
        y(best, j) = 1.0;
    }
    return y;
}

} // namespace

std::pair<TaskUniverse, std::vector<ClientDataset>> generate_universe(const UniverseConfig& config,
                                                                      std::uint64_t seed) {
    validate(config);
    const int theta_len = config.out_dim * config.dim;

    TaskUniverse universe;
    universe.config = config;
    universe.assignment.resize(config.clients);
    universe.truths.resize(config.clients);

    std::mt19937_64 rng(derive_seed(seed, seed_tag::data));

    std::vector<Vector> centers(config.clusters);
    for (int c = 0; c < config.clusters; ++c) {
        centers[c] = gaussian_matrix(theta_len, 1, config.inter_spread, rng).col(0);
    }
    for (int k = 0; k < config.clients; ++k) {
        universe.assignment[k] = k % config.clusters;
        universe.truths[k] =
            centers[universe.assignment[k]] + gaussian_matrix(theta_len, 1, config.intra_spread, rng).col(0);
    }

    // Optional log-normal size skew, roughly mean-preserving.
    std::vector<int> train_sizes(config.clients, config.n_train);
    if (config.size_skew > 0.0) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double sigma = config.size_skew;
        for (int k = 0; k < config.clients; ++k) {
            const double factor = std::exp(sigma * gauss(rng) - 0.5 * sigma * sigma);
            train_sizes[k] = std::max(1, static_cast<int>(std::lround(config.n_train * factor)));
        }
    }

    std::vector<ClientDataset> datasets(config.clients);
    for (int k = 0; k < config.clients; ++k) {
        ClientDataset& d = datasets[k];
        d.x_train = gaussian_matrix(config.dim, train_sizes[k], 1.0, rng);
        d.y_train = make_targets(universe.truths[k], d.x_train, config, rng);
        d.x_test = gaussian_matrix(config.dim, config.n_test, 1.0, rng);
        d.y_test = make_targets(universe.truths[k], d.x_test, config, rng);
    }
    return {std::move(universe), std::move(datasets)};
}

TaskGraph similarity_from_truth(const TaskUniverse& universe, double scale) {
    if (!(scale > 0.0)) throw InvalidConfig("scale", "must be positive");
    const int k = universe.client_count();
    Matrix w = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double dist2 = (universe.truths[i] - universe.truths[j]).squaredNorm();
            const double a = std::exp(-dist2 / scale);
            w(i, j) = a;
            w(j, i) = a;
        }
    }
    return new_task_graph(std::move(w));
}

namespace {

void write_split_csv(const Matrix& x, const Matrix& y, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file: " + path);
    for (Eigen::Index i = 0; i < x.rows(); ++i) out << "x" << i << ",";
    for (Eigen::Index i = 0; i < y.rows(); ++i) out << "y" << i << (i + 1 == y.rows() ? "" : ",");
    out << "\n";
    char buf[64];
    for (Eigen::Index col = 0; col < x.cols(); ++col) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", x(i, col));
            out << buf << ",";
        }
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", y(i, col));
            out << buf << (i + 1 == y.rows() ? "" : ",");
        }
        out << "\n";
    }
}

} // namespace

void write_dataset_csv(const ClientDataset& data, int client_id, const std::string& directory) {
    std::filesystem::create_directories(directory);
    const std::string stem = directory + "/client_" + std::to_string(client_id);
    write_split_csv(data.x_train, data.y_train, stem + "_train.csv");
    write_split_csv(data.x_test, data.y_test, stem + "_test.csv");
}

} // namespace mira
