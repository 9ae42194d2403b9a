#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbsde {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent setup, e.g. a delay that is not a multiple of the grid step.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Non-finite coefficient output while stepping a forward path.
class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t step, std::size_t sample)
        : Error(what + " (step " + std::to_string(step) + ", sample " + std::to_string(sample) + ")"),
          step_(step), sample_(sample) {}

    std::size_t step() const noexcept { return step_; }
    std::size_t sample() const noexcept { return sample_; }

private:
    std::size_t step_;
    std::size_t sample_;
};

class IllConditionedRegressionError : public Error {
public:
    IllConditionedRegressionError(std::size_t step, double condition)
        : Error("ill-conditioned regression at step " + std::to_string(step) +
                " (condition number " + std::to_string(condition) + ")"),
          step_(step), condition_(condition) {}

    std::size_t step() const noexcept { return step_; }
    double condition() const noexcept { return condition_; }

private:
    std::size_t step_;
    double condition_;
};

class StepSizeError : public Error {
public:
    using Error::Error;
};

/// Picard loop exhausted its iteration budget. Carries the residual history.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, std::vector<double> residuals)
        : Error(what), residuals_(std::move(residuals)) {}

    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

class ContractionError : public Error {
public:
    using Error::Error;
};

/// Operation called on an object that lacks the required data.
class StateError : public Error {
public:
    using Error::Error;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

class SingularVolatilityError : public Error {
public:
    using Error::Error;
};

}  // namespace dbsde
