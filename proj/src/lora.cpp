#include "mira/lora.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "mira/rng.hpp"

namespace mira {

namespace {

void check_length(Eigen::Index expected, Eigen::Index got, const char* what) {
    if (expected != got) {
        throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(expected) +
                                ", got " + std::to_string(got));
    }
}

} // namespace

LoraAdapter::LoraAdapter(Matrix base, Matrix b, Matrix a, int rank, double scale)
    : base_(std::move(base)), b_(std::move(b)), a_(std::move(a)), rank_(rank), scale_(scale) {}

LoraAdapter init_adapter(Matrix base, int rank, double init_scale, std::uint64_t seed,
                         double lora_scale) {
    const int d = static_cast<int>(base.rows());
    const int v = static_cast<int>(base.cols());
    const int max_rank = std::min(d, v);
    if (rank < 1 || rank > max_rank) throw RankOutOfRange(rank, max_rank);
    if (!(init_scale > 0.0)) {
        throw InvalidConfig("init_scale", "must be positive, got " + std::to_string(init_scale));
    }
    if (!(lora_scale > 0.0)) {
        throw InvalidConfig("lora_scale", "must be positive, got " + std::to_string(lora_scale));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, init_scale);
    Matrix b(d, rank);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < rank; ++j) b(i, j) = gauss(rng);
    }
    return LoraAdapter(std::move(base), std::move(b), Matrix::Zero(rank, v), rank, lora_scale);
}

Vector LoraAdapter::forward(const Vector& x) const {
    check_length(in_dim(), x.size(), "forward input");
    return base_ * x + scale_ * (b_ * (a_ * x));
}

Matrix LoraAdapter::forward(const Matrix& x_batch) const {
    check_length(in_dim(), x_batch.rows(), "forward batch rows");
    return base_ * x_batch + scale_ * (b_ * (a_ * x_batch));
}

LoraAdapter::BackwardResult LoraAdapter::backward(const Vector& x, const Vector& upstream) const {
    check_length(in_dim(), x.size(), "backward input");
    check_length(out_dim(), upstream.size(), "backward upstream");

    BackwardResult r;
    const Vector ax = a_ * x;                     // r
    const Vector btg = b_.transpose() * upstream; // r
    r.grad_b = scale_ * (upstream * ax.transpose());
    r.grad_a = scale_ * (btg * x.transpose());
    r.grad_x = base_.transpose() * upstream + scale_ * (a_.transpose() * btg);
    return r;
}

LoraAdapter::BatchBackwardResult LoraAdapter::backward(const Matrix& x_batch, const Matrix& upstream) const {
    check_length(in_dim(), x_batch.rows(), "backward batch rows");
    check_length(out_dim(), upstream.rows(), "backward upstream rows");
    check_length(x_batch.cols(), upstream.cols(), "backward batch columns");

    BatchBackwardResult r;
    const Matrix ax = a_ * x_batch;               // r x n
    const Matrix btg = b_.transpose() * upstream; // r x n
    r.grad_b = scale_ * (upstream * ax.transpose());
    r.grad_a = scale_ * (btg * x_batch.transpose());
    r.grad_x = base_.transpose() * upstream + scale_ * (a_.transpose() * btg);
    return r;
}

Matrix LoraAdapter::merge() const { return base_ + scale_ * (b_ * a_); }

Vector LoraAdapter::flatten_delta() const {
    Vector flat(delta_size());
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < b_.rows(); ++i) {
        for (Eigen::Index j = 0; j < b_.cols(); ++j) flat(pos++) = b_(i, j);
    }
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
        for (Eigen::Index j = 0; j < a_.cols(); ++j) flat(pos++) = a_(i, j);
    }
    return flat;
}

void LoraAdapter::load_delta(const Vector& flat) {
    if (flat.size() != delta_size()) {
        throw LengthMismatch(static_cast<std::size_t>(delta_size()), static_cast<std::size_t>(flat.size()));
    }
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < b_.rows(); ++i) {
        for (Eigen::Index j = 0; j < b_.cols(); ++j) b_(i, j) = flat(pos++);
    }
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
        for (Eigen::Index j = 0; j < a_.cols(); ++j) a_(i, j) = flat(pos++);
    }
}

void LoraAdapter::apply_step(const Grads& grads, double lr) {
    if (grads.grad_b.rows() != b_.rows() || grads.grad_b.cols() != b_.cols() ||
        grads.grad_a.rows() != a_.rows() || grads.grad_a.cols() != a_.cols()) {
        throw DimensionMismatch("gradient shapes do not match adapter factors");
    }
    if (lr != 0.0) {
        b_.noalias() -= lr * grads.grad_b;
        a_.noalias() -= lr * grads.grad_a;
    }
}

} // namespace mira
