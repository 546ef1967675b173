#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mira/model.hpp"
#include "mira/tasks.hpp"

namespace mira {

/// One federated participant: its model, its data, and its private minibatch
/// stream. Distinct clients may train concurrently; a single client must not.
class ClientState {
public:
    ClientState(int id, AdaptedModel model, ClientDataset data, std::uint64_t stream_seed,
                double local_lr, int batch_size);

    /// R local steps of (next minibatch -> forward -> backward -> sgd_step).
    /// Minibatches cycle through a per-epoch shuffle of the train set without
    /// replacement; a short final batch is kept; the stream persists across
    /// calls. Returns the trainable vector after the last step.
    Vector instruction_tuning(int steps);

    /// Full-dataset mean losses, (train, test). Pure.
    std::pair<double, double> evaluate() const;

    int id() const { return id_; }
    AdaptedModel& model() { return model_; }
    const AdaptedModel& model() const { return model_; }
    const ClientDataset& data() const { return data_; }
    int train_size() const { return data_.n_train(); }

private:
    std::vector<int> next_batch();

    int id_;
    AdaptedModel model_;
    ClientDataset data_;
    std::mt19937_64 stream_;
    double local_lr_;
    int batch_size_;
    std::vector<int> epoch_order_;
    std::size_t cursor_ = 0;
};

} // namespace mira
