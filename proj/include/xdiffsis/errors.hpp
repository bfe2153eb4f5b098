#pragma once

#include <stdexcept>
#include <string>

namespace xdiffsis {

/// Invalid argument or precondition violation on a public operation.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An iterative solver ran out of its iteration budget.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, double last_residual, long iterations)
        : std::runtime_error(msg), residual(last_residual), iters(iterations) {}

    double residual;
    long iters;
};

} // namespace xdiffsis
