#pragma once

#include <stdexcept>
#include <string>

namespace posefuse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input data that cannot be used (malformed files, broken invariants).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DegenerateProjection : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateConfiguration : public DataError {
 public:
  using DataError::DataError;
};

class EmptyHeatmap : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateBox : public DataError {
 public:
  using DataError::DataError;
};

class TooFewCameras : public DataError {
 public:
  using DataError::DataError;
};

class EmptyTrack : public DataError {
 public:
  using DataError::DataError;
};

class NumericalUnderflow : public DataError {
 public:
  using DataError::DataError;
};

class ZeroLengthLimb : public DataError {
 public:
  using DataError::DataError;
};

class NoOverlap : public DataError {
 public:
  using DataError::DataError;
};

class ActorOutOfView : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace posefuse
