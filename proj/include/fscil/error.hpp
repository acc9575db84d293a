#pragma once

#include <stdexcept>
#include <string>

namespace fscil {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad argument values: non-finite inputs, out-of-range parameters
struct InvalidInput : Error {
  using Error::Error;
};

// shape disagreement between tensors that must match
struct DimensionMismatch : Error {
  using Error::Error;
};

// mathematically undefined request, e.g. cosine of a zero vector
struct DegenerateInput : Error {
  using Error::Error;
};

// violation of the incremental-session contract (overlapping label
// spaces, wrong shot counts, stages run out of order)
struct ProtocolError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// malformed file content; message carries the offending location
struct ParseError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace fscil
