#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mira/model.hpp"
#include "oracles.hpp"

using mira::Matrix;
using mira::Vector;

namespace {

mira::ModelSpec small_spec() {
    mira::ModelSpec spec;
    spec.layer_dims = {4, 8, 3};
    spec.rank = 2;
    spec.activation = mira::Activation::Tanh;
    spec.head = mira::Head::Mse;
    spec.init_scale = 0.3;
    return spec;
}

// Forward pass recomputed from the frozen bases alone; valid only while the
// adapters still hold their zero-product initialization.
Matrix base_only_forward(const mira::AdaptedModel& m, const Matrix& x) {
    Matrix current = x;
    const auto& layers = m.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        current = layers[i].base() * current;
        if (i + 1 < layers.size()) current = current.array().tanh();
    }
    return current;
}

mira::AdaptedModel randomized_model(const mira::ModelSpec& spec, std::mt19937_64& rng) {
    mira::AdaptedModel m = mira::build_model(spec, rng(), rng());
    m.load_trainable(oracle::random_vector(m.trainable_count(), rng, 0.3));
    return m;
}

} // namespace

TEST_CASE("base weights depend only on the base seed") {
    const mira::ModelSpec spec = small_spec();
    const mira::AdaptedModel a = mira::build_model(spec, 100, 1);
    const mira::AdaptedModel b = mira::build_model(spec, 100, 2);
    const mira::AdaptedModel c = mira::build_model(spec, 101, 1);
    for (std::size_t i = 0; i < a.layers().size(); ++i) {
        CHECK(oracle::bitwise_equal(a.layers()[i].base(), b.layers()[i].base()));
        CHECK_FALSE(oracle::bitwise_equal(a.layers()[i].base(), c.layers()[i].base()));
    }
    // Different adapter seeds give different B factors over the same base.
    CHECK_FALSE(oracle::bitwise_equal(a.layers()[0].b_factor(), b.layers()[0].b_factor()));
    // Identical seeds reproduce the whole model bitwise.
    const mira::AdaptedModel again = mira::build_model(spec, 100, 1);
    CHECK(oracle::bitwise_equal(a.trainable_vector(), again.trainable_vector()));
}

TEST_CASE("parameter counts follow the layer dims and rank") {
    const mira::AdaptedModel m = mira::build_model(small_spec(), 1, 2);
    // 4->8 at rank 2: 8*2 + 2*4 = 24; 8->3: 3*2 + 2*8 = 22.
    CHECK(m.trainable_count() == 46);
    CHECK(m.frozen_count() == 4 * 8 + 8 * 3);
    CHECK(m.trainable_vector().size() == 46);
}

TEST_CASE("spec validation rejects bad dims and ranks") {
    mira::ModelSpec spec = small_spec();
    spec.layer_dims = {4};
    CHECK_THROWS_AS(mira::build_model(spec, 1, 2), mira::InvalidConfig);
    spec.layer_dims = {4, 0, 3};
    CHECK_THROWS_AS(mira::build_model(spec, 1, 2), mira::InvalidConfig);
    spec.layer_dims = {4, 8, 3};
    spec.rank = 4; // max is min(4,8,3) = 3
    try {
        mira::build_model(spec, 1, 2);
        FAIL("expected RankOutOfRange");
    } catch (const mira::RankOutOfRange& e) {
        CHECK(e.rank == 4);
        CHECK(e.max_rank == 3);
    }
}

TEST_CASE("fresh model computes the base-only chain") {
    std::mt19937_64 rng(7);
    const mira::AdaptedModel m = mira::build_model(small_spec(), 42, 43);
    const Matrix x = oracle::random_matrix(4, 5, rng);
    CHECK((m.predict(x) - base_only_forward(m, x)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("predicting the targets gives zero mse loss") {
    std::mt19937_64 rng(8);
    const mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const Matrix x = oracle::random_matrix(4, 6, rng);
    const Matrix y = m.predict(x);
    CHECK(m.forward_loss(x, y).loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scalar mse hand case") {
    mira::ModelSpec spec;
    spec.layer_dims = {1, 1};
    spec.rank = 1;
    spec.init_scale = 0.3;
    const mira::AdaptedModel m = mira::build_model(spec, 5, 6);
    const double w = m.layers()[0].base()(0, 0);

    Matrix x(1, 1), y(1, 1);
    x(0, 0) = 2.0;
    y(0, 0) = 1.0;
    // A == 0 at init, so the output is w*x exactly.
    const double want = 0.5 * (w * 2.0 - 1.0) * (w * 2.0 - 1.0);
    CHECK(m.forward_loss(x, y).loss == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("softmax head on zero logits costs ln(class count)") {
    mira::ModelSpec spec;
    spec.layer_dims = {4, 3};
    spec.rank = 2;
    spec.head = mira::Head::SoftmaxXent;
    spec.init_scale = 0.3;
    const mira::AdaptedModel m = mira::build_model(spec, 9, 10);

    const Matrix x = Matrix::Zero(4, 2); // zero input -> zero logits
    Matrix y = Matrix::Zero(3, 2);
    y(0, 0) = 1.0;
    y(2, 1) = 1.0;
    CHECK(m.forward_loss(x, y).loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("softmax loss is shift-invariant and stays finite on large logits") {
    mira::ModelSpec spec;
    spec.layer_dims = {2, 3};
    spec.rank = 1;
    spec.head = mira::Head::SoftmaxXent;
    spec.init_scale = 0.3;
    const mira::AdaptedModel m = mira::build_model(spec, 9, 10);
    Matrix x(2, 1);
    x << 300.0, -250.0; // large logits; unstabilized exp would overflow
    Matrix y = Matrix::Zero(3, 1);
    y(1, 0) = 1.0;
    CHECK(std::isfinite(m.forward_loss(x, y).loss));
}

TEST_CASE("non-finite losses are refused") {
    // Single linear layer: nothing squashes the input before the head.
    mira::ModelSpec spec = small_spec();
    spec.layer_dims = {4, 3};
    spec.rank = 2;
    const mira::AdaptedModel m = mira::build_model(spec, 1, 2);
    Matrix x = Matrix::Zero(4, 1);
    x(0, 0) = 1e200; // squared residual overflows to inf
    const Matrix y = Matrix::Zero(3, 1);
    CHECK_THROWS_AS(m.forward_loss(x, y), mira::NonFiniteLoss);
}

TEST_CASE("forward validates shapes") {
    const mira::AdaptedModel m = mira::build_model(small_spec(), 1, 2);
    CHECK_THROWS_AS(m.forward_loss(Matrix::Zero(5, 2), Matrix::Zero(3, 2)), mira::DimensionMismatch);
    CHECK_THROWS_AS(m.forward_loss(Matrix::Zero(4, 2), Matrix::Zero(2, 2)), mira::DimensionMismatch);
    CHECK_THROWS_AS(m.forward_loss(Matrix::Zero(4, 2), Matrix::Zero(3, 3)), mira::DimensionMismatch);
    CHECK_THROWS_AS(m.forward_loss(Matrix::Zero(4, 0), Matrix::Zero(3, 0)), mira::DimensionMismatch);
    CHECK_THROWS_AS(m.predict(Matrix::Zero(5, 2)), mira::DimensionMismatch);
}

TEST_CASE("zero residual gives a zero gradient") {
    std::mt19937_64 rng(11);
    const mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const Matrix x = oracle::random_matrix(4, 3, rng);
    const auto fwd = m.forward_loss(x, m.predict(x));
    CHECK(m.backward(fwd.cache).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("analytic model gradient matches finite differences for every head and activation") {
    std::mt19937_64 rng(12);
    for (mira::Head head : {mira::Head::Mse, mira::Head::SoftmaxXent}) {
        for (mira::Activation act : {mira::Activation::Tanh, mira::Activation::Relu}) {
            mira::ModelSpec spec;
            spec.layer_dims = {3, 4, 2};
            spec.rank = 2;
            spec.activation = act;
            spec.head = head;
            spec.init_scale = 0.3;
            mira::AdaptedModel m = randomized_model(spec, rng);

            const Matrix x = oracle::random_matrix(3, 4, rng);
            Matrix y;
            if (head == mira::Head::Mse) {
                y = oracle::random_matrix(2, 4, rng);
            } else {
                y = Matrix::Zero(2, 4);
                for (int c = 0; c < 4; ++c) y(c % 2, c) = 1.0;
            }

            const Vector analytic = m.backward(m.forward_loss(x, y).cache);
            const Vector at = m.trainable_vector();
            const auto f = [&](const Vector& flat) {
                mira::AdaptedModel probe = m;
                probe.load_trainable(flat);
                return probe.forward_loss(x, y).loss;
            };
            for (Eigen::Index i = 0; i < at.size(); ++i) {
                CHECK(oracle::rel_error(analytic(i), oracle::central_difference(f, at, i)) < 1e-5);
            }
        }
    }
}

TEST_CASE("duplicating every batch column leaves the mean gradient unchanged") {
    std::mt19937_64 rng(13);
    const mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const Matrix x = oracle::random_matrix(4, 3, rng);
    const Matrix y = oracle::random_matrix(3, 3, rng);

    Matrix x2(4, 6), y2(3, 6);
    x2 << x, x;
    y2 << y, y;

    const Vector g1 = m.backward(m.forward_loss(x, y).cache);
    const Vector g2 = m.backward(m.forward_loss(x2, y2).cache);
    CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("caches go stale when the model changes") {
    std::mt19937_64 rng(14);
    mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const Matrix x = oracle::random_matrix(4, 3, rng);
    const Matrix y = oracle::random_matrix(3, 3, rng);

    auto fwd = m.forward_loss(x, y);
    m.sgd_step(m.backward(fwd.cache), 0.01);
    CHECK_THROWS_AS(m.backward(fwd.cache), mira::StaleCache);

    // Even a zero-lr step invalidates outstanding caches.
    auto fwd2 = m.forward_loss(x, y);
    m.sgd_step(m.backward(fwd2.cache), 0.0);
    CHECK_THROWS_AS(m.backward(fwd2.cache), mira::StaleCache);

    // A cache from one model cannot drive another's backward pass.
    mira::AdaptedModel other = randomized_model(small_spec(), rng);
    auto fwd3 = m.forward_loss(x, y);
    CHECK_THROWS_AS(other.backward(fwd3.cache), mira::StaleCache);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
    std::mt19937_64 rng(15);
    mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const Vector before = m.trainable_vector();
    const Matrix x = oracle::random_matrix(4, 3, rng);
    const Matrix y = oracle::random_matrix(3, 3, rng);
    m.sgd_step(m.backward(m.forward_loss(x, y).cache), 0.0);
    CHECK(oracle::bitwise_equal(m.trainable_vector(), before));
}

TEST_CASE("one sgd step applies theta minus lr times gradient exactly") {
    std::mt19937_64 rng(16);
    mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const Vector theta0 = m.trainable_vector();
    const Matrix x = oracle::random_matrix(4, 3, rng);
    const Matrix y = oracle::random_matrix(3, 3, rng);
    const Vector g = m.backward(m.forward_loss(x, y).cache);

    m.sgd_step(g, 0.1);
    const Vector got = m.trainable_vector();
    for (Eigen::Index i = 0; i < theta0.size(); ++i) {
        CHECK(got(i) == theta0(i) - 0.1 * g(i));
    }
}

TEST_CASE("gradient descent on a convex problem decreases the loss monotonically") {
    std::mt19937_64 rng(17);
    mira::ModelSpec spec;
    spec.layer_dims = {4, 2};
    spec.rank = 2;
    spec.init_scale = 0.3;
    mira::AdaptedModel m = randomized_model(spec, rng);

    const Matrix x = oracle::random_matrix(4, 12, rng);
    const Matrix y = oracle::random_matrix(2, 12, rng);
    double last = m.forward_loss(x, y).loss;
    for (int step = 0; step < 20; ++step) {
        m.sgd_step(m.backward(m.forward_loss(x, y).cache), 0.05);
        const double now = m.forward_loss(x, y).loss;
        CHECK(now <= last + 1e-12);
        last = now;
    }
}

TEST_CASE("sgd_step validates gradient length and learning rate") {
    std::mt19937_64 rng(18);
    mira::AdaptedModel m = randomized_model(small_spec(), rng);
    try {
        m.sgd_step(Vector::Zero(3), 0.1);
        FAIL("expected LengthMismatch");
    } catch (const mira::LengthMismatch& e) {
        CHECK(e.expected == 46);
        CHECK(e.got == 3);
    }
    CHECK_THROWS_AS(m.sgd_step(Vector::Zero(46), -0.1), mira::InvalidConfig);
    CHECK_THROWS_AS(m.sgd_step(Vector::Zero(46), std::nan("")), mira::InvalidConfig);
    CHECK_THROWS_AS(m.sgd_step(Vector::Zero(46), std::numeric_limits<double>::infinity()),
                    mira::InvalidConfig);
}

TEST_CASE("trainable vector is the concatenation of per-layer deltas") {
    std::mt19937_64 rng(19);
    const mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const Vector flat = m.trainable_vector();
    Eigen::Index pos = 0;
    for (const mira::LoraAdapter& ad : m.layers()) {
        CHECK(oracle::bitwise_equal(Vector(flat.segment(pos, ad.delta_size())), ad.flatten_delta()));
        pos += ad.delta_size();
    }
    CHECK(pos == flat.size());
}

TEST_CASE("trainable state round-trips bitwise and transfers across models") {
    std::mt19937_64 rng(20);
    mira::AdaptedModel a = randomized_model(small_spec(), rng);
    mira::AdaptedModel b = mira::build_model(small_spec(), 999, 998);

    const Vector state = a.trainable_vector();
    b.load_trainable(state);
    CHECK(oracle::bitwise_equal(b.trainable_vector(), state));

    try {
        b.load_trainable(Vector::Zero(45));
        FAIL("expected LengthMismatch");
    } catch (const mira::LengthMismatch& e) {
        CHECK(e.expected == 46);
        CHECK(e.got == 45);
    }
}

TEST_CASE("models sharing a base seed predict identically after a state transfer") {
    std::mt19937_64 rng(21);
    mira::AdaptedModel a = mira::build_model(small_spec(), 77, 1);
    mira::AdaptedModel b = mira::build_model(small_spec(), 77, 2);
    a.load_trainable(oracle::random_vector(a.trainable_count(), rng, 0.3));
    b.load_trainable(a.trainable_vector());

    const Matrix x = oracle::random_matrix(4, 5, rng);
    CHECK(oracle::bitwise_equal(a.predict(x), b.predict(x)));
}

TEST_CASE("the frozen bases survive a long training run untouched") {
    std::mt19937_64 rng(22);
    mira::AdaptedModel m = randomized_model(small_spec(), rng);
    std::vector<Matrix> bases;
    for (const auto& layer : m.layers()) bases.push_back(layer.base());

    const Matrix x = oracle::random_matrix(4, 6, rng);
    const Matrix y = oracle::random_matrix(3, 6, rng);
    for (int step = 0; step < 50; ++step) {
        m.sgd_step(m.backward(m.forward_loss(x, y).cache), 0.02);
    }
    for (std::size_t i = 0; i < bases.size(); ++i) {
        CHECK(oracle::bitwise_equal(m.layers()[i].base(), bases[i]));
    }
}

TEST_CASE("checkpoints round-trip the trainable vector bitwise") {
    std::mt19937_64 rng(23);
    const mira::AdaptedModel m = randomized_model(small_spec(), rng);
    const std::string path = (std::filesystem::temp_directory_path() / "mira_ckpt_rt.bin").string();

    mira::write_checkpoint(m, path);
    const Vector back = mira::read_checkpoint(m.spec(), path);
    CHECK(oracle::bitwise_equal(back, m.trainable_vector()));

    mira::ModelSpec wrong = small_spec();
    wrong.rank = 3;
    CHECK_THROWS_AS(mira::read_checkpoint(wrong, path), mira::Error);
    wrong = small_spec();
    wrong.layer_dims = {4, 7, 3};
    CHECK_THROWS_AS(mira::read_checkpoint(wrong, path), mira::Error);

    // Chop the payload short.
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
    }
    CHECK_THROWS_AS(mira::read_checkpoint(m.spec(), path), mira::Error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(mira::read_checkpoint(m.spec(), path), mira::Error);
}

TEST_CASE("losses are never negative") {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 10; ++trial) {
        mira::ModelSpec spec = small_spec();
        spec.head = trial % 2 == 0 ? mira::Head::Mse : mira::Head::SoftmaxXent;
        const mira::AdaptedModel m = randomized_model(spec, rng);
        const Matrix x = oracle::random_matrix(4, 5, rng);
        Matrix y;
        if (spec.head == mira::Head::Mse) {
            y = oracle::random_matrix(3, 5, rng);
        } else {
            y = Matrix::Zero(3, 5);
            for (int c = 0; c < 5; ++c) y(c % 3, c) = 1.0;
        }
        CHECK(m.forward_loss(x, y).loss >= 0.0);
    }
}
