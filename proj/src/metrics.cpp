#include "mira/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "mira/server.hpp"

namespace mira {

double RoundReport::mean_train_loss() const {
    double total = 0.0;
    for (const ClientMetric& m : per_client) total += m.train_loss;
    return per_client.empty() ? 0.0 : total / per_client.size();
}

double RoundReport::mean_test_loss() const {
    double total = 0.0;
    for (const ClientMetric& m : per_client) total += m.test_loss;
    return per_client.empty() ? 0.0 : total / per_client.size();
}

ObjectiveValue objective_from_parts(const std::vector<double>& train_losses,
                                    const std::vector<Vector>& deltas, const TaskGraph& graph,
                                    double lambda) {
    if (train_losses.size() != deltas.size() ||
        static_cast<int>(deltas.size()) != graph.client_count()) {
        throw DimensionMismatch("objective needs one loss and one delta per graph client");
    }
    ObjectiveValue value;
    for (double loss : train_losses) value.global_loss += loss;
    value.reg_value = regularization_value(graph, deltas);
    value.objective = value.global_loss + lambda * value.reg_value;
    return value;
}

ObjectiveValue objective(const std::vector<ClientState>& clients, const TaskGraph& graph, double lambda) {
    std::vector<double> train_losses;
    std::vector<Vector> deltas;
    train_losses.reserve(clients.size());
    deltas.reserve(clients.size());
    for (const ClientState& c : clients) {
        train_losses.push_back(c.evaluate().first);
        deltas.push_back(c.model().trainable_vector());
    }
    return objective_from_parts(train_losses, deltas, graph, lambda);
}

std::pair<std::uint64_t, std::uint64_t> round_comm_cost(const AdaptedModel& model, int sampled_count,
                                                        StrategyKind kind) {
    if (kind == StrategyKind::LocalOnly) return {0, 0};
    const std::uint64_t bytes =
        static_cast<std::uint64_t>(sampled_count) * static_cast<std::uint64_t>(model.trainable_count()) * 8;
    return {bytes, bytes};
}

MemoryCost memory_cost(const AdaptedModel& model, const CostModel& cost_model) {
    MemoryCost cost;
    cost.base_bytes = static_cast<std::uint64_t>(model.frozen_count()) * cost_model.bytes_per_param;
    cost.adapter_bytes = static_cast<std::uint64_t>(model.trainable_count()) * cost_model.bytes_per_param;
    cost.optimizer_bytes = cost_model.optimizer_overhead;
    return cost;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_rounds_csv(const std::vector<RoundReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write CSV: " + path);
    out << "t,J,F,R_value,mean_train,mean_test,up_bytes,down_bytes\n";
    for (const RoundReport& r : reports) {
        out << r.round << "," << fmt(r.objective) << "," << fmt(r.global_loss) << "," << fmt(r.reg_value)
            << "," << fmt(r.mean_train_loss()) << "," << fmt(r.mean_test_loss()) << "," << r.cum_up_bytes
            << "," << r.cum_down_bytes << "\n";
    }
    if (!out) throw Error("failed while writing CSV: " + path);
}

void write_clients_csv(const std::vector<RoundReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write CSV: " + path);
    out << "t,client,train_loss,test_loss,sampled_flag\n";
    for (const RoundReport& r : reports) {
        for (const ClientMetric& m : r.per_client) {
            const bool sampled =
                std::find(r.sampled.begin(), r.sampled.end(), m.id) != r.sampled.end();
            out << r.round << "," << m.id << "," << fmt(m.train_loss) << "," << fmt(m.test_loss) << ","
                << (sampled ? 1 : 0) << "\n";
        }
    }
    if (!out) throw Error("failed while writing CSV: " + path);
}

} // namespace mira
