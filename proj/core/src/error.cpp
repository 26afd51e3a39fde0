#include "treat/error.hpp"

namespace treat {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::integration: return "integration";
    case ErrorKind::singularity: return "singularity";
    case ErrorKind::shape: return "shape";
    case ErrorKind::dataset: return "dataset";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::artifact_mismatch: return "artifact_mismatch";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

namespace {

std::string integration_message(const std::string& detail, std::size_t step) {
  if (step == IntegrationError::npos) return "integration failure: " + detail;
  return "integration failure at step " + std::to_string(step) + ": " + detail;
}

std::string dataset_message(const std::string& message, std::size_t line) {
  if (line == 0) return "dataset error: " + message;
  return "dataset error at line " + std::to_string(line) + ": " + message;
}

}  // namespace

IntegrationError::IntegrationError(const std::string& detail, std::size_t step)
    : Error(ErrorKind::integration, integration_message(detail, step)),
      detail_(detail),
      step_(step) {}

IntegrationError IntegrationError::at_step(std::size_t step) const {
  return IntegrationError(detail_, step);
}

DatasetError::DatasetError(const std::string& message, std::size_t line)
    : Error(ErrorKind::dataset, dataset_message(message, line)), line_(line) {}

DivergenceError::DivergenceError(const std::string& message, std::size_t step)
    : Error(ErrorKind::divergence,
            step == IntegrationError::npos
                ? message
                : message + " (step " + std::to_string(step) + ")"),
      step_(step) {}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::dataset:
    case ErrorKind::io:
    case ErrorKind::unsupported:
      return exit_code::config;
    case ErrorKind::integration:
    case ErrorKind::singularity:
      return exit_code::simulation;
    case ErrorKind::divergence:
      return exit_code::divergence;
    case ErrorKind::artifact_mismatch:
    case ErrorKind::shape:
      return exit_code::artifact;
  }
  return exit_code::failure;
}

}  // namespace treat
