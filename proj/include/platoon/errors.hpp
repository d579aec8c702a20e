#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace platoon {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scalar argument violates its documented range (tau <= 0, t < 0, NaN...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Time argument outside the game horizon [0, T].
class DomainError : public Error {
 public:
  using Error::Error;
};

// Initial configuration violates an ordering or formation requirement.
class InvalidScenario : public Error {
 public:
  using Error::Error;
};

// A shifted Gramian could not be inverted reliably.
class SingularMatrix : public Error {
 public:
  SingularMatrix(const std::string& what, double condition)
      : Error(what), condition_(condition) {}

  // Follower index and time are attached when known (index 0 means unknown).
  SingularMatrix(const std::string& what, double condition, std::size_t follower,
                 double t)
      : Error(what), condition_(condition), follower_(follower), time_(t) {}

  double condition() const noexcept { return condition_; }
  std::size_t follower() const noexcept { return follower_; }
  double time() const noexcept { return time_; }

 private:
  double condition_;
  std::size_t follower_ = 0;
  double time_ = 0.0;
};

// Forward integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t vehicle, double t)
      : Error(what), vehicle_(vehicle), time_(t) {}

  std::size_t vehicle() const noexcept { return vehicle_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t vehicle_;
  double time_;
};

// Scenario file could not be parsed or failed validation.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace platoon
