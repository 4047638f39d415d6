#pragma once

#include <stdexcept>
#include <string>

namespace ascflow {

/// Error categories, aligned one-to-one with the CLI exit codes.
enum class ErrorCategory : int {
    ok = 0,
    config = 2,   ///< malformed or invalid configuration
    engine = 3,   ///< time stepping / state evolution failures
    analysis = 4, ///< post-processing (fits, rescalings, audits)
    io = 5,       ///< filesystem failures
};

/// Base class for all library errors; carries the exit-code category.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ErrorCategory::config, message) {}
};

class EngineError : public Error {
public:
    explicit EngineError(const std::string& message) : Error(ErrorCategory::engine, message) {}
};

/// Strict convexity lost: the radii matrix stopped being positive definite
/// somewhere. Carries the worst node and its minimum eigenvalue so the
/// stepper can report (and the adaptive loop can roll back).
class ConvexityError : public EngineError {
public:
    ConvexityError(const std::string& message, int node, double min_eigenvalue, int substage = -1)
        : EngineError(message), node_(node), min_eigenvalue_(min_eigenvalue), substage_(substage) {}

    int node() const noexcept { return node_; }
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }
    /// RK substage index (0-3) where convexity failed, or -1 outside stepping.
    int substage() const noexcept { return substage_; }

private:
    int node_;
    double min_eigenvalue_;
    int substage_;
};

/// Spectral under-resolution: the field's energy above the band limit
/// exceeds the aliasing threshold. The caller must refine, not smooth.
class ResolutionError : public EngineError {
public:
    ResolutionError(const std::string& message, double aliasing_ratio)
        : EngineError(message), aliasing_ratio_(aliasing_ratio) {}

    double aliasing_ratio() const noexcept { return aliasing_ratio_; }

private:
    double aliasing_ratio_;
};

class AnalysisError : public Error {
public:
    explicit AnalysisError(const std::string& message) : Error(ErrorCategory::analysis, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorCategory::io, message) {}
};

} // namespace ascflow
