// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace softprune {

/// Base class for all softprune errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/layer shape disagreement; the message names the offending axes.
struct DimensionError : Error {
    using Error::Error;
};

/// Invalid argument value (out-of-range label, bad depth, ...).
struct InputError : Error {
    using Error::Error;
};

/// Invalid configuration (bad key, inconsistent preset, rate out of range).
struct ConfigError : Error {
    using Error::Error;
};

/// Object state does not admit the requested operation (stale cache,
/// mask/model mismatch, model not fully decayed).
struct StateError : Error {
    using Error::Error;
};

/// Malformed input file; the message carries a byte or line position.
struct ParseError : Error {
    using Error::Error;
};

/// Operation defined but deliberately not supported for these arguments.
struct UnsupportedError : Error {
    using Error::Error;
};

/// Training run failed; carries the epoch at which it happened.
struct RunError : Error {
    int epoch;
    RunError(const std::string& what, int epoch_index) : Error(what), epoch(epoch_index) {}
};

}  // namespace softprune
