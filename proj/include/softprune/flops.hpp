// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "softprune/graph.hpp"

namespace softprune {

/// Conventions for projecting a uniform pruning rate onto the graph.
///
/// residual: what happens to the channel count at a shortcut addition.
///   - restore: the add brings the trunk back to full width (zero-filled
///     channels still participate downstream), so every in-stage conv sees a
///     full-width input. The first conv of a model with shortcuts and the
///     final classifier also stay at full width.
///   - propagate: the reduced width flows through the addition unchanged.
///
/// widths: how a rate maps to a channel count.
///   - continuous: n*(1-rate), kept fractional. This is the reporting
///     convention; totals are rounded only once at the end.
///   - floored:    n - floor(n*rate), the integer count a physically
///     compacted model actually has. Matching count_flops on a compacted
///     graph exactly requires this mode.
struct PruneScope {
    enum class Residual { restore, propagate };
    enum class Widths { continuous, floored };
    Residual residual = Residual::restore;
    Widths widths = Widths::continuous;
};

struct FlopsReport {
    std::map<std::string, long long> per_layer;  // multiply-accumulate counts
    long long total = 0;
    long long params_total = 0;
    double reduction_vs(const FlopsReport& baseline) const;  // fraction removed
};

/// Multiply-accumulate count of one forward pass at the given uniform
/// pruning rate (0 = the unpruned baseline). One MAC is counted as one FLOP.
FlopsReport count_flops(const ModelGraph& model, double prune_rate, PruneScope scope = {});

}  // namespace softprune
