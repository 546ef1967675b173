#include "mira/client.hpp"

#include <numeric>
#include <string>

namespace mira {

namespace {
// Above this the run is considered diverged even though the value is finite.
constexpr double kLossCeiling = 1e6;
} // namespace

ClientState::ClientState(int id, AdaptedModel model, ClientDataset data, std::uint64_t stream_seed,
                         double local_lr, int batch_size)
    : id_(id), model_(std::move(model)), data_(std::move(data)), stream_(stream_seed),
      local_lr_(local_lr), batch_size_(batch_size) {
    if (batch_size_ < 1) throw InvalidConfig("batch_size", "must be >= 1");
    if (!(local_lr_ >= 0.0)) throw InvalidConfig("local_lr", "must be >= 0");
}

std::vector<int> ClientState::next_batch() {
    const int n = data_.n_train();
    if (epoch_order_.empty()) {
        epoch_order_.resize(n);
        std::iota(epoch_order_.begin(), epoch_order_.end(), 0);
        cursor_ = epoch_order_.size(); // force a shuffle on first use
    }
    if (cursor_ >= epoch_order_.size()) {
        for (int i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<int> pick(0, i);
            std::swap(epoch_order_[i], epoch_order_[pick(stream_)]);
        }
        cursor_ = 0;
    }
    const std::size_t take = std::min<std::size_t>(batch_size_, epoch_order_.size() - cursor_);
    std::vector<int> batch(epoch_order_.begin() + cursor_, epoch_order_.begin() + cursor_ + take);
    cursor_ += take;
    return batch;
}

Vector ClientState::instruction_tuning(int steps) {
    if (data_.n_train() == 0) throw EmptyDataset(id_);
    if (steps < 1) throw InvalidConfig("local_steps", "must be >= 1");

    for (int step = 0; step < steps; ++step) {
        const std::vector<int> batch = next_batch();
        Matrix x(data_.x_train.rows(), batch.size());
        Matrix y(data_.y_train.rows(), batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            x.col(i) = data_.x_train.col(batch[i]);
            y.col(i) = data_.y_train.col(batch[i]);
        }

        AdaptedModel::ForwardResult fwd;
        try {
            fwd = model_.forward_loss(x, y);
        } catch (const NonFiniteLoss& e) {
            throw NonFiniteLoss("client " + std::to_string(id_) + ": " + e.what());
        }
        if (fwd.loss > kLossCeiling) {
            throw NonFiniteLoss("client " + std::to_string(id_) + " diverged: loss " +
                                std::to_string(fwd.loss) + " exceeds " + std::to_string(kLossCeiling));
        }
        model_.sgd_step(model_.backward(fwd.cache), local_lr_);
    }
    return model_.trainable_vector();
}

std::pair<double, double> ClientState::evaluate() const {
    if (data_.n_train() == 0 || data_.n_test() == 0) throw EmptyDataset(id_);
    const double train = model_.forward_loss(data_.x_train, data_.y_train).loss;
    const double test = model_.forward_loss(data_.x_test, data_.y_test).loss;
    return {train, test};
}

} // namespace mira
