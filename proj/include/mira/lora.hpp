#pragma once

#include <cstdint>

#include "mira/errors.hpp"
#include "mira/linalg.hpp"

namespace mira {

/// Low-rank adapter over a frozen base linear map:
///   h = base * x + scale * B * (A * x).
/// base (d x v) is never mutated by training; B (d x r) and A (r x v) are the
/// trainable factors; scale is fixed at init (default 1, no alpha/r folding).
/// Immediately after init_adapter the product B*A is zero.
class LoraAdapter {
public:
    struct Grads {
        Matrix grad_b; // d x r
        Matrix grad_a; // r x v
    };
    struct BackwardResult : Grads {
        Vector grad_x; // v
    };
    struct BatchBackwardResult : Grads {
        Matrix grad_x; // v x n
    };

    int out_dim() const { return static_cast<int>(base_.rows()); }
    int in_dim() const { return static_cast<int>(base_.cols()); }
    int rank() const { return rank_; }
    double scale() const { return scale_; }

    const Matrix& base() const { return base_; }
    const Matrix& b_factor() const { return b_; }
    const Matrix& a_factor() const { return a_; }

    /// base*x + scale*B*(A*x), two rank-r products; B*A is never formed here.
    Vector forward(const Vector& x) const;
    /// Column-wise batch variant: X is v x n, result d x n.
    Matrix forward(const Matrix& x_batch) const;

    /// grad_B = s*g (Ax)^T, grad_A = s*(B^T g) x^T,
    /// grad_x = base^T g + s*A^T (B^T g), with s the adapter scale.
    /// The base receives no gradient.
    BackwardResult backward(const Vector& x, const Vector& upstream) const;
    /// Batch variant; factor gradients are summed over the batch columns.
    BatchBackwardResult backward(const Matrix& x_batch, const Matrix& upstream) const;

    /// base + scale*B*A, dense. The adapter itself is unchanged.
    Matrix merge() const;

    /// Canonical transport layout: row-major B, then row-major A.
    Eigen::Index delta_size() const { return b_.size() + a_.size(); }
    Vector flatten_delta() const;
    void load_delta(const Vector& flat);

    /// In-place optimizer step on the factors only.
    void apply_step(const Grads& grads, double lr);

private:
    LoraAdapter(Matrix base, Matrix b, Matrix a, int rank, double scale);
    friend LoraAdapter init_adapter(Matrix base, int rank, double init_scale, std::uint64_t seed,
                                    double lora_scale);

    Matrix base_;
    Matrix b_;
    Matrix a_;
    int rank_;
    double scale_;
};

/// B entries i.i.d. Gaussian(0, init_scale^2), A all zeros, so the merged
/// delta starts exactly at zero. Deterministic in seed.
LoraAdapter init_adapter(Matrix base, int rank, double init_scale, std::uint64_t seed,
                         double lora_scale = 1.0);

} // namespace mira
