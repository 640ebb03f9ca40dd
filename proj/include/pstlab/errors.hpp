#pragma once

#include <stdexcept>
#include <string>

namespace pstlab {

/// Invalid input or configuration. CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

class InvalidDesignError : public ValidationError {
public:
    explicit InvalidDesignError(const std::string& what) : ValidationError(what) {}
};

/// The spacing parametrization is defined for odd site counts only.
class UnsupportedParametrizationError : public ValidationError {
public:
    explicit UnsupportedParametrizationError(const std::string& what) : ValidationError(what) {}
};

class InvalidHamiltonianError : public ValidationError {
public:
    explicit InvalidHamiltonianError(const std::string& what) : ValidationError(what) {}
};

/// Measurement record set is incomplete, duplicated, or rank deficient.
class InvalidRecordError : public ValidationError {
public:
    explicit InvalidRecordError(const std::string& what) : ValidationError(what) {}
};

/// A computation failed numerically. CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// No usable local maximum inside the scan window.
class SearchFailureError : public NumericalError {
public:
    explicit SearchFailureError(const std::string& what) : NumericalError(what) {}
};

/// Post-selection onto a mode carrying (numerically) zero probability.
class EmptyPostselectionError : public NumericalError {
public:
    explicit EmptyPostselectionError(const std::string& what) : NumericalError(what) {}
};

}  // namespace pstlab
