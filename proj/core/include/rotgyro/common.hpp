#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace rotgyro {

using Complex = std::complex<double>;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or preconditions supplied by the caller.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A configured size limit (basis dimension, dense solve size) was exceeded.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to converge or violated one of its bounds.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, std::string stage = {})
        : Error(stage.empty() ? what : "[" + stage + "] " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace rotgyro
