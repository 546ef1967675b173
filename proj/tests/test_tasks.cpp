#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mira/tasks.hpp"
#include "oracles.hpp"

using mira::Matrix;
using mira::Vector;

namespace {

mira::UniverseConfig base_config() {
    mira::UniverseConfig c;
    c.clients = 6;
    c.clusters = 2;
    c.dim = 5;
    c.out_dim = 1;
    c.intra_spread = 0.1;
    c.inter_spread = 1.0;
    c.noise_std = 0.1;
    c.n_train = 12;
    c.n_test = 20;
    return c;
}

std::vector<std::vector<double>> read_csv(const std::string& path, std::string& header) {
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::getline(in, header);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

TEST_CASE("single cluster with zero intra spread gives every client the same truth") {
    mira::UniverseConfig c = base_config();
    c.clusters = 1;
    c.intra_spread = 0.0;
    const auto [universe, datasets] = mira::generate_universe(c, 3);
    REQUIRE(universe.client_count() == 6);
    for (int k = 1; k < 6; ++k) {
        CHECK(oracle::bitwise_equal(universe.truths[k], universe.truths[0]));
    }
}

TEST_CASE("cluster assignment is round-robin") {
    mira::UniverseConfig c = base_config();
    c.clients = 7;
    c.clusters = 3;
    const auto [universe, datasets] = mira::generate_universe(c, 3);
    const std::vector<int> want{0, 1, 2, 0, 1, 2, 0};
    CHECK(universe.assignment == want);
}

TEST_CASE("noiseless targets are recovered by least squares") {
    mira::UniverseConfig c;
    c.clients = 1;
    c.clusters = 1;
    c.dim = 6;
    c.out_dim = 1;
    c.noise_std = 0.0;
    c.intra_spread = 0.0;
    c.inter_spread = 1.0;
    c.n_train = 40;
    c.n_test = 10;
    const auto [universe, datasets] = mira::generate_universe(c, 11);

    const Vector theta_hat = oracle::ols_fit(datasets[0].x_train, Vector(datasets[0].y_train.row(0)));
    CHECK((theta_hat - universe.truths[0]).norm() < 1e-8);
}

TEST_CASE("multi-output truths act row-major on the inputs") {
    mira::UniverseConfig c = base_config();
    c.clients = 2;
    c.clusters = 1;
    c.out_dim = 3;
    c.noise_std = 0.0;
    const auto [universe, datasets] = mira::generate_universe(c, 5);
    REQUIRE(universe.truths[0].size() == 3 * 5);

    // Row i of the truth map is theta[i*dim .. (i+1)*dim).
    const Vector& theta = universe.truths[0];
    const Matrix& x = datasets[0].x_train;
    for (int i = 0; i < 3; ++i) {
        const Vector row = theta.segment(i * 5, 5);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            CHECK(datasets[0].y_train(i, j) == doctest::Approx(row.dot(x.col(j))).epsilon(1e-12));
        }
    }
}

TEST_CASE("generation is bitwise deterministic in config and seed") {
    const mira::UniverseConfig c = base_config();
    const auto [u1, d1] = mira::generate_universe(c, 21);
    const auto [u2, d2] = mira::generate_universe(c, 21);
    const auto [u3, d3] = mira::generate_universe(c, 22);

    for (int k = 0; k < c.clients; ++k) {
        CHECK(oracle::bitwise_equal(u1.truths[k], u2.truths[k]));
        CHECK(oracle::bitwise_equal(d1[k].x_train, d2[k].x_train));
        CHECK(oracle::bitwise_equal(d1[k].y_train, d2[k].y_train));
        CHECK(oracle::bitwise_equal(d1[k].x_test, d2[k].x_test));
        CHECK(oracle::bitwise_equal(d1[k].y_test, d2[k].y_test));
    }
    CHECK_FALSE(oracle::bitwise_equal(u1.truths[0], u3.truths[0]));
}

TEST_CASE("split sizes match the config and all values are finite") {
    const mira::UniverseConfig c = base_config();
    const auto [universe, datasets] = mira::generate_universe(c, 9);
    for (const mira::ClientDataset& d : datasets) {
        CHECK(d.n_train() == 12);
        CHECK(d.n_test() == 20);
        CHECK(d.x_train.rows() == 5);
        CHECK(d.y_train.rows() == 1);
        CHECK(d.x_train.allFinite());
        CHECK(d.y_train.allFinite());
        CHECK(d.x_test.allFinite());
        CHECK(d.y_test.allFinite());
    }
}

TEST_CASE("classification targets are one-hot columns") {
    mira::UniverseConfig c = base_config();
    c.family = mira::TaskFamily::Classification;
    c.out_dim = 4;
    const auto [universe, datasets] = mira::generate_universe(c, 13);
    std::set<int> classes_seen;
    for (const mira::ClientDataset& d : datasets) {
        for (Eigen::Index j = 0; j < d.y_train.cols(); ++j) {
            CHECK(d.y_train.col(j).sum() == 1.0);
            CHECK(d.y_train.col(j).maxCoeff() == 1.0);
            CHECK(d.y_train.col(j).minCoeff() == 0.0);
            Eigen::Index which = 0;
            d.y_train.col(j).maxCoeff(&which);
            classes_seen.insert(static_cast<int>(which));
        }
    }
    CHECK(classes_seen.size() > 1); // labels are not constant across the universe
}

TEST_CASE("classification with a single output class is rejected") {
    mira::UniverseConfig c = base_config();
    c.family = mira::TaskFamily::Classification;
    c.out_dim = 1;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
}

TEST_CASE("config validation names the broken field") {
    mira::UniverseConfig c = base_config();
    c.clusters = 0;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
    c = base_config();
    c.clients = 1; // fewer clients than clusters
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
    c = base_config();
    c.dim = 0;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
    c = base_config();
    c.out_dim = 0;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
    c = base_config();
    c.intra_spread = -0.1;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
    c = base_config();
    c.noise_std = -1.0;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
    c = base_config();
    c.n_train = 0;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
    c = base_config();
    c.size_skew = -0.5;
    CHECK_THROWS_AS(mira::generate_universe(c, 1), mira::InvalidConfig);
}

TEST_CASE("size skew varies train sizes around the configured mean") {
    mira::UniverseConfig c = base_config();
    c.clients = 20;
    c.clusters = 2;
    c.n_train = 40;
    c.size_skew = 1.0;
    const auto [universe, datasets] = mira::generate_universe(c, 31);

    std::set<int> sizes;
    for (const mira::ClientDataset& d : datasets) {
        CHECK(d.n_train() >= 1);
        sizes.insert(d.n_train());
        CHECK(d.n_test() == c.n_test); // test split size is never skewed
    }
    CHECK(sizes.size() > 1);
}

TEST_CASE("truth similarity graph is valid, bounded and orders clusters correctly") {
    mira::UniverseConfig c = base_config();
    c.clients = 8;
    c.clusters = 2;
    c.intra_spread = 0.0; // in-cluster distance exactly zero
    const auto [universe, datasets] = mira::generate_universe(c, 17);
    const mira::TaskGraph g = mira::similarity_from_truth(universe, 1.0);

    REQUIRE(g.client_count() == 8);
    double min_in = 1.0;
    double max_cross = 0.0;
    for (int i = 0; i < 8; ++i) {
        for (int j = i + 1; j < 8; ++j) {
            const double a = g.weight(i, j);
            CHECK(a > 0.0);
            CHECK(a <= 1.0);
            if (universe.assignment[i] == universe.assignment[j]) {
                CHECK(a == 1.0); // exp(0)
                min_in = std::min(min_in, a);
            } else {
                max_cross = std::max(max_cross, a);
            }
        }
    }
    CHECK(min_in > max_cross);
    CHECK_THROWS_AS(mira::similarity_from_truth(universe, 0.0), mira::InvalidConfig);
}

TEST_CASE("dataset csv files round-trip every value") {
    const mira::UniverseConfig c = base_config();
    const auto [universe, datasets] = mira::generate_universe(c, 41);
    const std::string dir =
        (std::filesystem::temp_directory_path() / "mira_tasks_csv_test").string();
    mira::write_dataset_csv(datasets[2], 2, dir);

    std::string header;
    const auto train = read_csv(dir + "/client_2_train.csv", header);
    CHECK(header == "x0,x1,x2,x3,x4,y0");
    REQUIRE(train.size() == 12);
    for (int j = 0; j < 12; ++j) {
        REQUIRE(train[j].size() == 6);
        for (int i = 0; i < 5; ++i) CHECK(train[j][i] == datasets[2].x_train(i, j));
        CHECK(train[j][5] == datasets[2].y_train(0, j));
    }

    const auto test = read_csv(dir + "/client_2_test.csv", header);
    CHECK(test.size() == 20);
    std::filesystem::remove_all(dir);
}
