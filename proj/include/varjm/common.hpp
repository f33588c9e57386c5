#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace varjm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
inline constexpr double kPi = std::numbers::pi;

/// Number of time-basis functions per marker (intercept + slope).
inline constexpr int kBasisDim = 2;

/// Base error type. The message is prefixed with the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& message)
      : std::runtime_error("[" + module + "] " + message), module_(module) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data-io", message) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& message)
      : Error("correlation-geometry", message) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& message) : Error("model-core", message) {}
};

class SamplerError : public Error {
 public:
  explicit SamplerError(const std::string& message) : Error("sampler", message) {}
};

class BaselineError : public Error {
 public:
  explicit BaselineError(const std::string& message) : Error("baselines", message) {}
};

class SimulationError : public Error {
 public:
  explicit SimulationError(const std::string& message) : Error("sim-harness", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("cli", message) {}
};

/// SplitMix64 finalizer; used to derive independent RNG seeds from a
/// (seed, stream) pair so per-chain and per-replicate streams never depend
/// on scheduling.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace varjm
