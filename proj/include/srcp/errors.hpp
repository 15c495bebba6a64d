#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

namespace srcp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// A caller broke a documented precondition (argument ordering, grid layout).
class ContractViolation : public Error {
  public:
    using Error::Error;
};

/// The integrand hits a true singularity (z = 0, surface-polariton pole).
class SingularityError : public DomainError {
  public:
    using DomainError::DomainError;
};

/// A velocity model that cannot produce the requested quantity.
class UnsupportedModel : public Error {
  public:
    using Error::Error;
};

/// Two evaluations that should agree differ by more than the tolerance.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string& what, std::complex<double> value_a,
                     std::complex<double> value_b)
        : Error(what), value_a_(value_a), value_b_(value_b) {}

    std::complex<double> value_a() const { return value_a_; }
    std::complex<double> value_b() const { return value_b_; }

  private:
    std::complex<double> value_a_;
    std::complex<double> value_b_;
};

/// Adaptive quadrature ran out of subdivision depth before meeting tolerance.
class AccuracyError : public Error {
  public:
    AccuracyError(const std::string& what, std::complex<double> estimate, double error_bound)
        : Error(what), estimate_(estimate), error_bound_(error_bound) {}

    std::complex<double> estimate() const { return estimate_; }
    double error_bound() const { return error_bound_; }

  private:
    std::complex<double> estimate_;
    double error_bound_;
};

/// A configuration document or data file is malformed. `where` names the
/// offending key path or row.
class ConfigError : public DomainError {
  public:
    ConfigError(const std::string& what, std::string where)
        : DomainError(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}

    const std::string& where() const { return where_; }

  private:
    std::string where_;
};

/// Reading or writing persisted curves failed.
class StorageError : public Error {
  public:
    StorageError(const std::string& what, std::string path)
        : Error(what + " [" + path + "]"), path_(std::move(path)) {}

    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

}  // namespace srcp
