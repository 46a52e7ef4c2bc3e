#ifndef STE_ERROR_HPP
#define STE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ste {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An evaluation point is not strictly above the expansion origin, or an
/// argument lies outside the domain of a closed-form expression.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A result is not representable as a finite double. Rescaling the inputs
/// and the response usually brings it back into range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: CSV, JSON documents, mismatched sizes.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Every local optimization failed for a given number of components.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace ste

#endif  // STE_ERROR_HPP
