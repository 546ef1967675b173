#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mira/model.hpp"

namespace mira {

/// Finite-difference verification of the analytic backward pass.
struct GradCheckOptions {
    int seeds_per_combo = 10;
    double tolerance = 1e-6;
    double fd_step = 1e-5;
    bool inject_fault = false; // sign-flip one A-factor gradient block; must fail
};

struct GradCheckCombo {
    Head head = Head::Mse;
    Activation activation = Activation::Tanh;
    double max_rel_error = 0.0;
    std::uint64_t worst_seed = 0;
    int worst_index = -1; // flat parameter index of the worst coordinate
};

struct GradCheckReport {
    std::vector<GradCheckCombo> combos; // all four head/activation pairs
    double max_rel_error = 0.0;
    bool passed = false;
};

GradCheckReport run_grad_check(const GradCheckOptions& options = {});

/// Aggregation and Laplacian property suite, each property verified against an
/// independently-built dense oracle.
struct OracleCheckOptions {
    int trials = 100;
    std::uint64_t seed = 0x5EED;
    bool force_unsafe_step = false; // drive eta*lambda past 2/lambda_max; the
                                    // contraction property must then report a violation
};

struct OracleProperty {
    std::string name;
    bool passed = false;
    std::string detail; // worst error, or the violation found
};

struct OracleCheckReport {
    std::vector<OracleProperty> properties;
    bool passed = false;
};

OracleCheckReport run_oracle_check(const OracleCheckOptions& options = {});

} // namespace mira
