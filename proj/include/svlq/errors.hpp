#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace svlq {

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct KernelNotSquareIntegrable : ValidationError {
    using ValidationError::ValidationError;
};

struct NotAnSDEReduction : ValidationError {
    using ValidationError::ValidationError;
};

// Inner fixed-point iteration failed to settle; the history holds the
// sup-norm change after each sweep at the offending level.
struct SolverDivergence : std::runtime_error {
    SolverDivergence(const std::string& what, int level, std::vector<double> history)
        : std::runtime_error(what), level(level), residual_history(std::move(history)) {}
    int level;
    std::vector<double> residual_history;
};

struct NonConvergence : std::runtime_error {
    NonConvergence(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), change_history(std::move(history)) {}
    std::vector<double> change_history;
};

struct OracleFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace svlq
