#pragma once

#include <stdexcept>
#include <string>

namespace rmdp {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (bad dimensions, non-stochastic data, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical routine could not produce a result for valid-looking input.
class SolverError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NotStochastic : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InvalidDiscount : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyInput : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IndexOutOfRange : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RankTooLarge : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SingularMatrix : public SolverError {
public:
    using SolverError::SolverError;
};

class Infeasible : public SolverError {
public:
    using SolverError::SolverError;
};

class Unbounded : public SolverError {
public:
    using SolverError::SolverError;
};

class TooLarge : public SolverError {
public:
    using SolverError::SolverError;
};

class NotConverged : public SolverError {
public:
    using SolverError::SolverError;
};

} // namespace rmdp
