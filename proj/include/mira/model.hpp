#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mira/errors.hpp"
#include "mira/linalg.hpp"
#include "mira/lora.hpp"

namespace mira {

enum class Activation { Tanh, Relu };
enum class Head { Mse, SoftmaxXent };

Activation activation_from_string(const std::string& name);
Head head_from_string(const std::string& name);
std::string to_string(Activation a);
std::string to_string(Head h);

/// Recipe for a stack of adapted linear layers.
/// layer_dims = [input dim, hidden dims..., output dim]; layer i maps
/// layer_dims[i] -> layer_dims[i+1]. The activation sits between layers,
/// never after the last one.
struct ModelSpec {
    std::vector<int> layer_dims;
    int rank = 1;
    Activation activation = Activation::Tanh;
    Head head = Head::Mse;
    double init_scale = 0.02;
    double lora_scale = 1.0; // multiplier on every adapter's B*A contribution

    int layer_count() const { return static_cast<int>(layer_dims.size()) - 1; }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
};

/// Small trainable network whose only trainable parameters are the per-layer
/// LoRA factors. Batches are column-wise: inputs are input_dim x n, targets
/// output_dim x n (one-hot columns for the softmax head).
class AdaptedModel {
public:
    /// Activation snapshot tied to one forward pass; consumed by backward().
    struct Cache {
        std::vector<Matrix> layer_inputs;    // input to each layer, v_i x n
        std::vector<Matrix> pre_activations; // adapter output of each layer, d_i x n
        Matrix targets;
        const AdaptedModel* owner = nullptr;
        std::uint64_t revision = 0;
    };
    struct ForwardResult {
        double loss = 0.0;
        Cache cache;
    };

    ForwardResult forward_loss(const Matrix& inputs, const Matrix& targets) const;

    /// Flat gradient over all trainable parameters, layer by layer in the
    /// canonical flatten layout. Throws StaleCache if the model changed since
    /// the matching forward pass.
    Vector backward(const Cache& cache) const;

    void sgd_step(const Vector& grad, double lr);

    Vector trainable_vector() const;
    void load_trainable(const Vector& flat);

    /// Forward pass without a loss head; returns output_dim x n.
    Matrix predict(const Matrix& inputs) const;

    std::int64_t trainable_count() const;
    std::int64_t frozen_count() const;

    const ModelSpec& spec() const { return spec_; }
    const std::vector<LoraAdapter>& layers() const { return layers_; }
    std::uint64_t revision() const { return revision_; }

private:
    AdaptedModel(ModelSpec spec, std::vector<LoraAdapter> layers);
    friend AdaptedModel build_model(const ModelSpec& spec, std::uint64_t base_seed, std::uint64_t adapter_seed);

    double head_loss(const Matrix& outputs, const Matrix& targets) const;
    Matrix head_gradient(const Matrix& outputs, const Matrix& targets) const;

    ModelSpec spec_;
    std::vector<LoraAdapter> layers_;
    std::uint64_t revision_ = 0;
};

/// Base matrices are drawn from base_seed only, adapters from adapter_seed
/// only: equal base seeds give bitwise-equal frozen weights across models.
AdaptedModel build_model(const ModelSpec& spec, std::uint64_t base_seed, std::uint64_t adapter_seed);

/// Checkpoint file: text header (layer dims, rank, activation, head) followed
/// by the trainable vector as raw 64-bit little-endian floats in canonical
/// layout. The frozen base is reproducible from its seed and is not stored.
void write_checkpoint(const AdaptedModel& m, const std::string& path);

/// Validates the header against `expected` and returns the stored trainable
/// vector, bit-exact. Throws Error on header mismatch or truncation.
Vector read_checkpoint(const ModelSpec& expected, const std::string& path);

} // namespace mira
