#pragma once

#include <stdexcept>
#include <string>

namespace tcm {

// Base class for all library errors. Subclasses distinguish caller mistakes
// (validation, schema) from broken runtime state (staleness, contract).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Out-of-range index (token id, class target, row index).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value; message carries the violated constraint,
// prefixed with the field path when parsed from a config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input document (JSONL line, label mapping file).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Empty or otherwise unusable input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Hyperparameter outside its admissible range.
class HyperparameterError : public Error {
 public:
  using Error::Error;
};

// A precomputed artifact (label embedding cache, checkpoint/mapping pair)
// no longer matches the state it was derived from.
class StalenessError : public Error {
 public:
  using Error::Error;
};

// An API precondition was violated (e.g. optimizer step without gradients).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Filesystem / serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tcm
