// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "softprune/graph.hpp"

namespace softprune {

/// Writes the full graph (layer specs, residual wiring, parameters) to one
/// file: a line-oriented text header, a "blob" sentinel line, then every
/// parameter tensor as raw little-endian float64 in header order.
void save_checkpoint(const ModelGraph& model, const std::string& path);

/// Rebuilds a model from save_checkpoint output. Throws ParseError on any
/// malformed or truncated input, including trailing garbage.
ModelGraph load_checkpoint(const std::string& path);

}  // namespace softprune
