#pragma once

#include <stdexcept>
#include <string>

namespace trecs {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
public:
  using Error::Error;
};

class BoundsError : public Error {
public:
  using Error::Error;
};

/// Requested tensor would not fit in addressable memory.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Invalid argument that is not a shape problem (bad tolerance, count, ...).
class ArgumentError : public Error {
public:
  using Error::Error;
};

/// A dense kernel failed to converge.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// A contraction lost a component (rank mismatch or complex spectrum).
/// `mode()` is the mode-pair index the failure was detected on, or -1.
class DegeneracyError : public Error {
public:
  explicit DegeneracyError(const std::string &what, int mode = -1)
      : Error(what), mode_(mode) {}
  int mode() const noexcept { return mode_; }

private:
  int mode_;
};

/// Two contraction weights produced coinciding eigenvalues, so factor
/// pairing is ill-defined.
class GenericityError : public Error {
public:
  explicit GenericityError(const std::string &what, int mode = -1)
      : Error(what), mode_(mode) {}
  int mode() const noexcept { return mode_; }

private:
  int mode_;
};

/// Factor sets from neighbouring mode pairs could not be matched.
class AlignmentError : public Error {
public:
  using Error::Error;
};

/// The decomposition ran but does not reproduce its input.
class DecompositionError : public Error {
public:
  using Error::Error;
};

/// A recovery subproblem did not converge, or the scale system is singular.
class RecoveryError : public Error {
public:
  using Error::Error;
};

/// Malformed file content.
class FormatError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace trecs
