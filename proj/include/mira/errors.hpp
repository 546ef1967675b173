#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mira {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- graph construction ---

class TooFewClients : public Error {
public:
    explicit TooFewClients(int k)
        : Error("task graph needs at least 2 clients, got " + std::to_string(k)), client_count(k) {}
    int client_count;
};

class AsymmetricWeights : public Error {
public:
    AsymmetricWeights(int i, int j)
        : Error("weights not symmetric: entry (" + std::to_string(i) + "," + std::to_string(j) +
                ") differs from its transpose"),
          row(i), col(j) {}
    int row, col;
};

class NegativeWeight : public Error {
public:
    NegativeWeight(int i, int j)
        : Error("negative weight at (" + std::to_string(i) + "," + std::to_string(j) + ")"), row(i), col(j) {}
    int row, col;
};

class NonzeroDiagonal : public Error {
public:
    explicit NonzeroDiagonal(int i)
        : Error("self-loop: diagonal entry (" + std::to_string(i) + "," + std::to_string(i) +
                ") must be 0"),
          index(i) {}
    int index;
};

class ZeroDegreeGraph : public Error {
public:
    ZeroDegreeGraph() : Error("all graph weights are zero; no step bound exists") {}
};

// --- shapes and transport ---

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& msg) : Error("dimension mismatch: " + msg) {}
};

class LengthMismatch : public Error {
public:
    LengthMismatch(std::size_t expected, std::size_t got)
        : Error("length mismatch: expected " + std::to_string(expected) + ", got " + std::to_string(got)),
          expected(expected), got(got) {}
    std::size_t expected, got;
};

class RankOutOfRange : public Error {
public:
    RankOutOfRange(int rank, int max_rank)
        : Error("rank " + std::to_string(rank) + " outside [1, " + std::to_string(max_rank) + "]"),
          rank(rank), max_rank(max_rank) {}
    int rank, max_rank;
};

// --- training / aggregation ---

class StaleCache : public Error {
public:
    StaleCache() : Error("backward called with a cache from an outdated forward pass") {}
};

class NonFiniteLoss : public Error {
public:
    explicit NonFiniteLoss(const std::string& msg) : Error(msg) {}
};

class EmptyDataset : public Error {
public:
    explicit EmptyDataset(int client_id)
        : Error("client " + std::to_string(client_id) + " has an empty dataset"), client_id(client_id) {}
    int client_id;
};

class MissingClient : public Error {
public:
    explicit MissingClient(int client_id)
        : Error("unknown client id " + std::to_string(client_id)), client_id(client_id) {}
    int client_id;
};

class InvalidConfig : public Error {
public:
    InvalidConfig(const std::string& field, const std::string& msg)
        : Error("config field '" + field + "': " + msg), field(field) {}
    std::string field;
};

/// Wraps a client or aggregation failure with round context.
class RunError : public Error {
public:
    RunError(int round, int client_id, const std::string& msg)
        : Error("round " + std::to_string(round) + ", client " + std::to_string(client_id) + ": " + msg),
          round(round), client_id(client_id) {}
    int round, client_id;
};

} // namespace mira
