// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace caw {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree (message names both shapes).
struct ShapeError : Error {
  using Error::Error;
};

// Softmax asked to normalize over an empty (all-masked) support.
struct MaskError : Error {
  using Error::Error;
};

// Bad hyperparameter / run configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input file; message carries the line number where known.
struct ParseError : Error {
  using Error::Error;
};

// Lookup id outside a table's row range.
struct IndexError : Error {
  using Error::Error;
};

// API misuse (e.g. backward from a non-scalar).
struct ContractError : Error {
  using Error::Error;
};

}  // namespace caw
