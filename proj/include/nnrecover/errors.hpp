#pragma once

#include <stdexcept>
#include <string>

namespace nnrecover {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid sizes (k > d, n = 0, mismatched slot shapes, ...).
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Rank-deficient or otherwise ill-conditioned weight matrix.
class ConditioningError : public Error {
  public:
    using Error::Error;
};

class QuadratureError : public Error {
  public:
    using Error::Error;
};

/// Activation does not satisfy what an algorithm needs (homogeneity,
/// non-vanishing third/fourth moment, ...).
class EligibilityError : public Error {
  public:
    using Error::Error;
};

class DecompositionError : public Error {
  public:
    using Error::Error;
};

class DegenerateSpectrumError : public Error {
  public:
    using Error::Error;
};

class IllPosedRecoveryError : public Error {
  public:
    using Error::Error;
};

class DivergenceError : public Error {
  public:
    using Error::Error;
};

/// Wraps a failure from one stage of the initialization pipeline.
class StageError : public Error {
  public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

} // namespace nnrecover
