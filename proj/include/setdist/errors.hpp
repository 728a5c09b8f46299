#pragma once

#include <stdexcept>
#include <string>

namespace setdist {

// Error taxonomy used across the library. All inherit from std::runtime_error
// so callers can catch coarsely; the distinct types exist for tests and for
// the CLI's structured reports.

struct GridMismatchError : std::runtime_error {
    explicit GridMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct IncompleteCurveError : std::runtime_error {
    explicit IncompleteCurveError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateGridError : std::runtime_error {
    explicit DegenerateGridError(const std::string& what) : std::runtime_error(what) {}
};

struct BoundaryConditionError : std::runtime_error {
    explicit BoundaryConditionError(const std::string& what) : std::runtime_error(what) {}
};

struct ConditionError : std::runtime_error {
    explicit ConditionError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ChartError : std::runtime_error {
    explicit ChartError(const std::string& what) : std::runtime_error(what) {}
};

struct SpaceMismatchError : std::runtime_error {
    explicit SpaceMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct StatisticsError : std::runtime_error {
    explicit StatisticsError(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace setdist
