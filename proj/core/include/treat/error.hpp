#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace treat {

// Error categories. The CLI maps each category to a fixed process exit code.
enum class ErrorKind {
  config,             // invalid parameters, unknown fields, bad shapes in user input
  integration,        // non-finite state or derivative during a physics integration
  singularity,        // singular mass matrix / denominator in a closed-form system
  shape,              // tensor shape mismatch inside the autodiff engine
  dataset,            // malformed or version-mismatched dataset file
  divergence,         // neural rollout or gradient went non-finite
  artifact_mismatch,  // checkpoint incompatible with config or data
  unsupported,        // operation not defined for the requested system kind
  io,                 // filesystem failure
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error(ErrorKind::shape, message) {}
};

class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& message)
      : Error(ErrorKind::singularity, message) {}
};

class UnsupportedSystemError : public Error {
 public:
  explicit UnsupportedSystemError(const std::string& message)
      : Error(ErrorKind::unsupported, message) {}
};

class ArtifactMismatchError : public Error {
 public:
  explicit ArtifactMismatchError(const std::string& message)
      : Error(ErrorKind::artifact_mismatch, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

/// Non-finite value during a fixed-step integration. Carries the step index
/// once the integrator loop has attached it (npos before that).
class IntegrationError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit IntegrationError(const std::string& detail, std::size_t step = npos);

  [[nodiscard]] std::size_t step() const noexcept { return step_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }
  [[nodiscard]] IntegrationError at_step(std::size_t step) const;

 private:
  std::string detail_;
  std::size_t step_;
};

/// Dataset parse failure; `line` is 1-based, 0 when not tied to a line.
class DatasetError : public Error {
 public:
  DatasetError(const std::string& message, std::size_t line = 0);

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Neural rollout produced non-finite latents, or training gradients blew up.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& message, std::size_t step = IntegrationError::npos);

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Process exit codes shared by every CLI command.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int simulation = 3;
inline constexpr int divergence = 4;
inline constexpr int artifact = 5;
}  // namespace exit_code

int exit_code_for(ErrorKind kind);

}  // namespace treat
