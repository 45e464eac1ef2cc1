#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ntklab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised by iterative eigensolvers; carries the best estimate reached.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_min, double best_max)
      : Error(what), best_lambda_min(best_min), best_lambda_max(best_max) {}
  double best_lambda_min;
  double best_lambda_max;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment or network configuration. `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field_name, const std::string& what)
      : Error(field_name + ": " + what), field(std::move(field_name)) {}
  std::string field;
};

/// The dense Jacobian would exceed the desk-scale memory guard.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> loss_trace)
      : Error(what), losses(std::move(loss_trace)) {}
  std::vector<double> losses;
};

class NotWellConditioned : public Error {
 public:
  NotWellConditioned(const std::string& what, double lmin) : Error(what), lambda_min(lmin) {}
  double lambda_min;
};

class PrecisionFloor : public Error {
 public:
  PrecisionFloor(const std::string& what, double best, double h)
      : Error(what), best_residual(best), best_h(h) {}
  double best_residual;
  double best_h;
};

/// The estimated mean of the features or of the backprop rows vanishes, so the
/// rank-one split used by the centering identity is undefined.
class ZeroMeanDegenerate : public Error {
 public:
  using Error::Error;
};

}  // namespace ntklab
