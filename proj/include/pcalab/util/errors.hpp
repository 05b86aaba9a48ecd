#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pcalab {

/// An iterative method stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> best_residuals = {})
        : std::runtime_error(what), residuals_(std::move(best_residuals)) {}
    [[nodiscard]] const std::vector<double>& best_residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

/// A request exceeds the memory or size limits of an exact method.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pcalab
