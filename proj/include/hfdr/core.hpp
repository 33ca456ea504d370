#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace hfdr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

// Error hierarchy. The CLI maps these onto exit codes:
// InvalidArgument -> 1, DataError -> 2, NumericalError (and subclasses) -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double kkt_residual)
      : NumericalError(what + " (KKT residual " + std::to_string(kkt_residual) + ")"),
        kkt_residual_(kkt_residual) {}
  double kkt_residual() const { return kkt_residual_; }

 private:
  double kkt_residual_;
};

class RankDeficiency : public NumericalError {
 public:
  RankDeficiency(const std::string& what, Index column)
      : NumericalError(what), column_(column) {}
  Index column() const { return column_; }

 private:
  Index column_;
};

// Raised by the exact path algorithms when two events coincide or the active
// Gram matrix is singular; callers fall back to Monte Carlo.
class DegenerateEvent : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// splitmix64 finalizer; used to derive independent streams from one master seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Ints>
std::uint64_t derive_seed(std::uint64_t master, Ints... keys) {
  std::uint64_t h = mix64(master);
  ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(keys) + 0x632be59bd9b4e019ULL))), ...);
  return h;
}

template <typename... Ints>
Rng make_rng(std::uint64_t master, Ints... keys) {
  return Rng(derive_seed(master, keys...));
}

// Stream tags keep derived seeds of different subsystems apart.
enum class Stream : std::uint64_t {
  mc = 1,
  crt = 2,
  bootstrap = 3,
  folds = 4,
  design = 5,
  noise = 6,
  truth = 7,
  calibration = 8,
};

}  // namespace hfdr
