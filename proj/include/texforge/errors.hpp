#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace texforge {

class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an ODF has no positive volume (q·a <= 0).
class DegenerateOdf : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Newton failure in the Taylor slip-rate solve.  Carries the final residual
/// and, once propagated through the velocity field, the node index.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, double residual, std::ptrdiff_t node = -1)
        : std::runtime_error(what), residual_(residual), node_(node) {}

    double residual() const noexcept { return residual_; }
    std::ptrdiff_t node() const noexcept { return node_; }

  private:
    double residual_;
    std::ptrdiff_t node_;
};

class NumericalBlowup : public std::runtime_error {
  public:
    NumericalBlowup(const std::string& what, int substep)
        : std::runtime_error(what), substep_(substep) {}
    int substep() const noexcept { return substep_; }

  private:
    int substep_;
};

/// Surrogate output vanished after the ReLU stage.
class DeadOutput : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigurationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input file could not be read or parsed.  `line` is 1-based, 0 if unknown.
class FileError : public std::runtime_error {
  public:
    FileError(const std::string& path, std::size_t line, const std::string& message)
        : std::runtime_error(path + (line ? ":" + std::to_string(line) : std::string()) + ": " +
                             message),
          path_(path), line_(line) {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

  private:
    std::string path_;
    std::size_t line_;
};

}  // namespace texforge
