#include "mira/server.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "mira/rng.hpp"

namespace mira {

StrategyKind strategy_from_string(const std::string& name) {
    if (name == "mira") return StrategyKind::Mira;
    if (name == "fedavg") return StrategyKind::FedAvg;
    if (name == "local_only") return StrategyKind::LocalOnly;
    throw InvalidConfig("strategy", "unknown strategy '" + name + "'");
}

std::string to_string(StrategyKind k) {
    switch (k) {
    case StrategyKind::Mira: return "mira";
    case StrategyKind::FedAvg: return "fedavg";
    default: return "local_only";
    }
}

NeighborMode neighbor_mode_from_string(const std::string& name) {
    if (name == "all_stale") return NeighborMode::AllStale;
    if (name == "sampled_only") return NeighborMode::SampledOnly;
    throw InvalidConfig("neighbor_mode", "unknown mode '" + name + "'");
}

std::string to_string(NeighborMode m) { return m == NeighborMode::AllStale ? "all_stale" : "sampled_only"; }

std::vector<int> sample_clients(const ServerState& state) {
    const int k = state.graph.client_count();
    if (!(state.sample_fraction > 0.0 && state.sample_fraction <= 1.0)) {
        throw InvalidConfig("sample_fraction", "must lie in (0, 1]");
    }
    const int count = std::clamp(static_cast<int>(std::lround(state.sample_fraction * k)), 1, k);

    std::mt19937_64 rng(derive_seed(state.sampling_seed, seed_tag::sampling,
                                    static_cast<std::uint64_t>(state.round)));
    std::vector<int> pool(k);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, k - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

namespace {

void check_fresh(const ServerState& state, const std::map<int, Vector>& fresh) {
    const int k = state.graph.client_count();
    if (static_cast<int>(state.deltas.size()) != k) {
        throw DimensionMismatch("server holds " + std::to_string(state.deltas.size()) +
                                " deltas for " + std::to_string(k) + " clients");
    }
    const Eigen::Index len = state.deltas.empty() ? 0 : state.deltas[0].size();
    for (const Vector& d : state.deltas) {
        if (d.size() != len) throw LengthMismatch(len, d.size());
    }
    for (const auto& [id, delta] : fresh) {
        if (id < 0 || id >= k) throw MissingClient(id);
        if (delta.size() != len) throw LengthMismatch(len, delta.size());
    }
}

} // namespace

std::vector<Vector> mira_aggregate(const ServerState& state, const std::map<int, Vector>& fresh) {
    check_fresh(state, fresh);
    const int k = state.graph.client_count();
    const double step = state.strategy.eta * state.strategy.lambda;

    // Snapshot of every client's pre-update value (Jacobi sweep).
    std::vector<const Vector*> latest(k);
    std::vector<char> in_sample(k, 0);
    for (int i = 0; i < k; ++i) latest[i] = &state.deltas[i];
    for (const auto& [id, delta] : fresh) {
        latest[id] = &delta;
        in_sample[id] = 1;
    }

    std::vector<Vector> next(state.deltas);
    for (const auto& [id, delta] : fresh) next[id] = delta;
    if (step == 0.0) return next; // lambda = 0: plain per-client training, no coupling

    for (const auto& [id, delta] : fresh) {
        Vector pull = Vector::Zero(delta.size());
        for (int other = 0; other < k; ++other) {
            if (other == id) continue;
            if (state.neighbor_mode == NeighborMode::SampledOnly && !in_sample[other]) continue;
            const double a = state.graph.weight(id, other);
            if (a != 0.0) pull.noalias() += a * (delta - *latest[other]);
        }
        next[id] = delta - step * pull;
    }
    return next;
}

std::vector<Vector> fedavg_aggregate(const ServerState& state, const std::map<int, Vector>& fresh) {
    check_fresh(state, fresh);
    if (fresh.empty()) throw MissingClient(-1);
    if (static_cast<int>(state.train_sizes.size()) != state.graph.client_count()) {
        throw DimensionMismatch("train_sizes must cover every client");
    }

    double weight_sum = 0.0;
    Vector average = Vector::Zero(fresh.begin()->second.size());
    for (const auto& [id, delta] : fresh) {
        const double w = static_cast<double>(state.train_sizes[id]);
        average.noalias() += w * delta;
        weight_sum += w;
    }
    average /= weight_sum;

    return std::vector<Vector>(state.graph.client_count(), average);
}

std::vector<RoundReport> run(int rounds, int local_steps, std::vector<ClientState>& clients,
                             ServerState& state, const RunOptions& options) {
    if (rounds < 1) throw InvalidConfig("rounds", "must be >= 1");
    const int k = state.graph.client_count();
    if (static_cast<int>(clients.size()) != k) {
        throw DimensionMismatch("client list does not match graph size");
    }
    const StrategyKind kind = state.strategy.kind;

    std::vector<RoundReport> reports;
    reports.reserve(rounds);

    for (int t = 1; t <= rounds; ++t) {
        state.round = t;

        std::vector<int> sampled;
        if (kind == StrategyKind::LocalOnly) {
            sampled.resize(k);
            std::iota(sampled.begin(), sampled.end(), 0);
        } else {
            sampled = sample_clients(state);
            for (int id : sampled) clients[id].model().load_trainable(state.deltas[id]);
        }

        // RunError carries (round, client) context; -1 marks server-side steps.
        auto train_one = [&](int id) -> Vector {
            try {
                return clients[id].instruction_tuning(local_steps);
            } catch (const RunError&) {
                throw;
            } catch (const Error& e) {
                throw RunError(t, id, e.what());
            }
        };

        std::map<int, Vector> fresh;
        if (options.parallel_clients && sampled.size() > 1) {
            std::vector<std::future<Vector>> futures;
            futures.reserve(sampled.size());
            for (int id : sampled) {
                futures.push_back(std::async(std::launch::async, train_one, id));
            }
            for (std::size_t i = 0; i < sampled.size(); ++i) {
                fresh[sampled[i]] = futures[i].get();
            }
        } else {
            for (int id : sampled) fresh[id] = train_one(id);
        }

        try {
            switch (kind) {
            case StrategyKind::Mira:
                state.deltas = mira_aggregate(state, fresh);
                break;
            case StrategyKind::FedAvg:
                state.deltas = fedavg_aggregate(state, fresh);
                break;
            case StrategyKind::LocalOnly:
                for (auto& [id, delta] : fresh) state.deltas[id] = std::move(delta);
                break;
            }
        } catch (const Error& e) {
            throw RunError(t, -1, e.what());
        }

        const auto [up, down] =
            round_comm_cost(clients[0].model(), static_cast<int>(sampled.size()), kind);
        state.cum_up_bytes += up;
        state.cum_down_bytes += down;

        RoundReport report;
        report.round = t;
        report.sampled = sampled;
        report.cum_up_bytes = state.cum_up_bytes;
        report.cum_down_bytes = state.cum_down_bytes;

        std::vector<double> train_losses(k);
        report.per_client.resize(k);
        for (int id = 0; id < k; ++id) {
            clients[id].model().load_trainable(state.deltas[id]);
            const auto [train, test] = clients[id].evaluate();
            report.per_client[id] = {id, train, test};
            train_losses[id] = train;
        }
        const double lambda = kind == StrategyKind::Mira ? state.strategy.lambda : 0.0;
        const ObjectiveValue value = objective_from_parts(train_losses, state.deltas, state.graph, lambda);
        report.objective = value.objective;
        report.global_loss = value.global_loss;
        report.reg_value = value.reg_value;

        if (options.on_round) options.on_round(report);
        reports.push_back(std::move(report));
    }
    return reports;
}

} // namespace mira
