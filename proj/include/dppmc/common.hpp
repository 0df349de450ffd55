#pragma once

#include <stdexcept>
#include <string>

namespace dppmc {

// Base type for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A kernel (or candidate pool) whose rank cannot support the requested
// subset size.
struct InsufficientRankError : Error {
  using Error::Error;
};

// Exact enumeration was requested for a ground set above the hard cap.
struct CapExceededError : Error {
  using Error::Error;
};

// The variance-reducing kernel construction found no pair satisfying the
// sign condition, so no off-diagonal coupling can be placed.
struct NoPositivePairError : Error {
  using Error::Error;
};

// Step-size explosion inside the covariance adaptation loop.
struct CovarianceBlowupError : Error {
  using Error::Error;
};

// Malformed experiment configuration; message carries line/key context.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed dataset file (non-numeric cell, ragged rows, ...).
struct DatasetError : Error {
  using Error::Error;
};

}  // namespace dppmc
