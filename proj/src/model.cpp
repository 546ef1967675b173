#include "mira/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mira/rng.hpp"

namespace mira {

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw InvalidConfig("activation", "unknown activation '" + name + "' (expected tanh or relu)");
}

Head head_from_string(const std::string& name) {
    if (name == "mse") return Head::Mse;
    if (name == "softmax_xent") return Head::SoftmaxXent;
    throw InvalidConfig("head", "unknown head '" + name + "' (expected mse or softmax_xent)");
}

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }
std::string to_string(Head h) { return h == Head::Mse ? "mse" : "softmax_xent"; }

namespace {

void validate_spec(const ModelSpec& spec) {
    if (spec.layer_dims.size() < 2) {
        throw InvalidConfig("layer_dims", "need at least input and output dims");
    }
    for (int d : spec.layer_dims) {
        if (d < 1) throw InvalidConfig("layer_dims", "dims must be positive");
    }
    int max_rank = spec.layer_dims[0];
    for (std::size_t i = 0; i + 1 < spec.layer_dims.size(); ++i) {
        max_rank = std::min({max_rank, spec.layer_dims[i], spec.layer_dims[i + 1]});
    }
    if (spec.rank < 1 || spec.rank > max_rank) throw RankOutOfRange(spec.rank, max_rank);
}

Matrix apply_activation(const Matrix& z, Activation act) {
    if (act == Activation::Tanh) return z.array().tanh();
    return z.array().max(0.0);
}

// Derivative evaluated at the pre-activation, multiplied into the upstream.
Matrix activation_backward(const Matrix& upstream, const Matrix& z, Activation act) {
    if (act == Activation::Tanh) {
        return (upstream.array() * (1.0 - z.array().tanh().square())).matrix();
    }
    return (upstream.array() * (z.array() > 0.0).cast<double>()).matrix();
}

} // namespace

AdaptedModel::AdaptedModel(ModelSpec spec, std::vector<LoraAdapter> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {}

AdaptedModel build_model(const ModelSpec& spec, std::uint64_t base_seed, std::uint64_t adapter_seed) {
    validate_spec(spec);

    std::mt19937_64 base_rng(base_seed);
    std::vector<LoraAdapter> layers;
    layers.reserve(spec.layer_count());
    for (int layer = 0; layer < spec.layer_count(); ++layer) {
        const int v = spec.layer_dims[layer];
        const int d = spec.layer_dims[layer + 1];
        // Fan-in scaled base so activations stay O(1) at any width.
        std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(v)));
        Matrix base(d, v);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < v; ++j) base(i, j) = gauss(base_rng);
        }
        layers.push_back(init_adapter(std::move(base), spec.rank, spec.init_scale,
                                      derive_seed(adapter_seed, layer), spec.lora_scale));
    }
    return AdaptedModel(std::move(spec), std::move(layers));
}

double AdaptedModel::head_loss(const Matrix& outputs, const Matrix& targets) const {
    const double n = static_cast<double>(outputs.cols());
    if (spec_.head == Head::Mse) {
        return 0.5 * (outputs - targets).squaredNorm() / n;
    }
    // softmax cross-entropy, column-wise, log-sum-exp stabilized
    double total = 0.0;
    for (Eigen::Index i = 0; i < outputs.cols(); ++i) {
        const Vector z = outputs.col(i);
        const double zmax = z.maxCoeff();
        const double lse = zmax + std::log((z.array() - zmax).exp().sum());
        total += lse - targets.col(i).dot(z);
    }
    return total / n;
}

Matrix AdaptedModel::head_gradient(const Matrix& outputs, const Matrix& targets) const {
    const double n = static_cast<double>(outputs.cols());
    if (spec_.head == Head::Mse) {
        return (outputs - targets) / n;
    }
    Matrix grad(outputs.rows(), outputs.cols());
    for (Eigen::Index i = 0; i < outputs.cols(); ++i) {
        const Vector z = outputs.col(i);
        const double zmax = z.maxCoeff();
        const Eigen::ArrayXd e = (z.array() - zmax).exp();
        grad.col(i) = (e / e.sum()).matrix() - targets.col(i);
    }
    return grad / n;
}

AdaptedModel::ForwardResult AdaptedModel::forward_loss(const Matrix& inputs, const Matrix& targets) const {
    if (inputs.rows() != spec_.input_dim()) {
        throw DimensionMismatch("input rows " + std::to_string(inputs.rows()) + " vs model input dim " +
                                std::to_string(spec_.input_dim()));
    }
    if (targets.rows() != spec_.output_dim()) {
        throw DimensionMismatch("target rows " + std::to_string(targets.rows()) + " vs model output dim " +
                                std::to_string(spec_.output_dim()));
    }
    if (inputs.cols() != targets.cols() || inputs.cols() < 1) {
        throw DimensionMismatch("batch: " + std::to_string(inputs.cols()) + " inputs vs " +
                                std::to_string(targets.cols()) + " targets");
    }

    ForwardResult result;
    Cache& cache = result.cache;
    cache.layer_inputs.reserve(layers_.size());
    cache.pre_activations.reserve(layers_.size());

    Matrix current = inputs;
    for (std::size_t layer = 0; layer < layers_.size(); ++layer) {
        cache.layer_inputs.push_back(current);
        Matrix z = layers_[layer].forward(current);
        cache.pre_activations.push_back(z);
        if (layer + 1 < layers_.size()) {
            current = apply_activation(z, spec_.activation);
        } else {
            current = std::move(z);
        }
    }

    result.loss = head_loss(current, targets);
    if (!std::isfinite(result.loss)) {
        throw NonFiniteLoss("forward pass produced a non-finite loss");
    }
    cache.targets = targets;
    cache.owner = this;
    cache.revision = revision_;
    return result;
}

Vector AdaptedModel::backward(const Cache& cache) const {
    if (cache.owner != this || cache.revision != revision_ ||
        cache.layer_inputs.size() != layers_.size()) {
        throw StaleCache();
    }

    Vector grad(trainable_count());
    Eigen::Index write_end = grad.size();

    Matrix upstream = head_gradient(cache.pre_activations.back(), cache.targets);
    for (int layer = static_cast<int>(layers_.size()) - 1; layer >= 0; --layer) {
        const LoraAdapter& ad = layers_[layer];
        auto grads = ad.backward(cache.layer_inputs[layer], upstream);

        const Eigen::Index nb = grads.grad_b.size();
        const Eigen::Index na = grads.grad_a.size();
        Eigen::Index pos = write_end - nb - na;
        for (Eigen::Index i = 0; i < grads.grad_b.rows(); ++i) {
            for (Eigen::Index j = 0; j < grads.grad_b.cols(); ++j) grad(pos++) = grads.grad_b(i, j);
        }
        for (Eigen::Index i = 0; i < grads.grad_a.rows(); ++i) {
            for (Eigen::Index j = 0; j < grads.grad_a.cols(); ++j) grad(pos++) = grads.grad_a(i, j);
        }
        write_end -= nb + na;

        if (layer > 0) {
            upstream = activation_backward(grads.grad_x, cache.pre_activations[layer - 1], spec_.activation);
        }
    }
    return grad;
}

void AdaptedModel::sgd_step(const Vector& grad, double lr) {
    if (grad.size() != trainable_count()) {
        throw LengthMismatch(static_cast<std::size_t>(trainable_count()),
                             static_cast<std::size_t>(grad.size()));
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw InvalidConfig("lr", "learning rate must be finite and non-negative");
    }
    if (lr == 0.0) {
        ++revision_;
        return;
    }
    Eigen::Index pos = 0;
    for (LoraAdapter& ad : layers_) {
        LoraAdapter::Grads g;
        g.grad_b.resize(ad.b_factor().rows(), ad.b_factor().cols());
        g.grad_a.resize(ad.a_factor().rows(), ad.a_factor().cols());
        for (Eigen::Index i = 0; i < g.grad_b.rows(); ++i) {
            for (Eigen::Index j = 0; j < g.grad_b.cols(); ++j) g.grad_b(i, j) = grad(pos++);
        }
        for (Eigen::Index i = 0; i < g.grad_a.rows(); ++i) {
            for (Eigen::Index j = 0; j < g.grad_a.cols(); ++j) g.grad_a(i, j) = grad(pos++);
        }
        ad.apply_step(g, lr);
    }
    ++revision_;
}

Vector AdaptedModel::trainable_vector() const {
    Vector flat(trainable_count());
    Eigen::Index pos = 0;
    for (const LoraAdapter& ad : layers_) {
        flat.segment(pos, ad.delta_size()) = ad.flatten_delta();
        pos += ad.delta_size();
    }
    return flat;
}

void AdaptedModel::load_trainable(const Vector& flat) {
    if (flat.size() != trainable_count()) {
        throw LengthMismatch(static_cast<std::size_t>(trainable_count()),
                             static_cast<std::size_t>(flat.size()));
    }
    Eigen::Index pos = 0;
    for (LoraAdapter& ad : layers_) {
        ad.load_delta(flat.segment(pos, ad.delta_size()));
        pos += ad.delta_size();
    }
    ++revision_;
}

Matrix AdaptedModel::predict(const Matrix& inputs) const {
    if (inputs.rows() != spec_.input_dim()) {
        throw DimensionMismatch("input rows " + std::to_string(inputs.rows()) + " vs model input dim " +
                                std::to_string(spec_.input_dim()));
    }
    Matrix current = inputs;
    for (std::size_t layer = 0; layer < layers_.size(); ++layer) {
        Matrix z = layers_[layer].forward(current);
        if (layer + 1 < layers_.size()) {
            current = apply_activation(z, spec_.activation);
        } else {
            current = std::move(z);
        }
    }
    return current;
}

std::int64_t AdaptedModel::trainable_count() const {
    std::int64_t total = 0;
    for (const LoraAdapter& ad : layers_) total += ad.delta_size();
    return total;
}

std::int64_t AdaptedModel::frozen_count() const {
    std::int64_t total = 0;
    for (const LoraAdapter& ad : layers_) total += ad.base().size();
    return total;
}

namespace {

std::string dims_string(const std::vector<int>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(dims[i]);
    }
    return out;
}

std::string header_line(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw Error("checkpoint truncated before '" + key + "' line");
    const std::string prefix = key + ": ";
    if (line.rfind(prefix, 0) != 0) {
        throw Error("checkpoint header expected '" + key + ": ...', got '" + line + "'");
    }
    return line.substr(prefix.size());
}

} // namespace

// Raw doubles are written in host byte order; this targets the little-endian
// hosts the artifact runs on.
void write_checkpoint(const AdaptedModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint: " + path);
    const Vector flat = m.trainable_vector();
    out << "mira checkpoint v1\n";
    out << "layer_dims: " << dims_string(m.spec().layer_dims) << "\n";
    out << "rank: " << m.spec().rank << "\n";
    out << "activation: " << to_string(m.spec().activation) << "\n";
    out << "head: " << to_string(m.spec().head) << "\n";
    out << "values: " << flat.size() << "\n";
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(flat.size())));
    if (!out) throw Error("short write on checkpoint: " + path);
}

Vector read_checkpoint(const ModelSpec& expected, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read checkpoint: " + path);

    std::string magic;
    std::getline(in, magic);
    if (magic != "mira checkpoint v1") throw Error("not a checkpoint file: " + path);

    const std::string dims = header_line(in, "layer_dims");
    if (dims != dims_string(expected.layer_dims)) {
        throw Error("checkpoint layer dims " + dims + " do not match model " +
                    dims_string(expected.layer_dims));
    }
    const std::string rank = header_line(in, "rank");
    if (rank != std::to_string(expected.rank)) {
        throw Error("checkpoint rank " + rank + " does not match model rank " +
                    std::to_string(expected.rank));
    }
    const std::string activation = header_line(in, "activation");
    if (activation != to_string(expected.activation)) {
        throw Error("checkpoint activation " + activation + " does not match model");
    }
    const std::string head = header_line(in, "head");
    if (head != to_string(expected.head)) {
        throw Error("checkpoint head " + head + " does not match model");
    }

    const std::string count_text = header_line(in, "values");
    Eigen::Index count = 0;
    try {
        count = static_cast<Eigen::Index>(std::stoll(count_text));
    } catch (const std::exception&) {
        throw Error("checkpoint value count is not a number: " + count_text);
    }
    if (count < 0) throw Error("checkpoint value count is negative");

    Vector flat(count);
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(count)));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(count))) {
        throw Error("checkpoint truncated: " + path);
    }
    return flat;
}

} // namespace mira
