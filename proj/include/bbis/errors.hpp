#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bbis {

//! Invalid argument (dimension mismatch, non-finite input, bad config value).
class ArgumentError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//! A bandwidth rule produced zero (all points identical, zero spread).
class DegenerateBandwidthError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! A weighting scheme produced weights that cannot be normalized.
class DegenerateWeightsError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Numerical breakdown: NaN gradient, indefinite Gram matrix, singular system.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! The score or log-density is not finite at some point.
class EvaluationError : public std::runtime_error
{
public:
  EvaluationError(const std::string& what, std::size_t index = npos)
    : std::runtime_error(what)
    , index_(index)
  {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  //! Row index of the offending point, or npos when unknown.
  std::size_t index() const { return index_; }

private:
  std::size_t index_;
};

//! A solver was asked to handle a configuration it does not support.
class UnsupportedConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace bbis
