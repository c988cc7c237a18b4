#pragma once

#include <stdexcept>
#include <string>

namespace iia {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The 3-form is not stable of negative type, or the induced metric is not
/// positive definite.
class NotPositiveError : public Error {
 public:
  using Error::Error;
};

class PrimitivityError : public Error {
 public:
  using Error::Error;
};

/// ω³ disagrees with the fixed orientation e¹²³⁴⁵⁶.
class OrientationError : public Error {
 public:
  using Error::Error;
};

/// A linear solve or a grid point lost non-degeneracy.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class NotExactError : public Error {
 public:
  using Error::Error;
};

/// A perturbation left the basin in which the constructions are valid.
class TooFarError : public Error {
 public:
  using Error::Error;
};

class StepUnderflowError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace iia
