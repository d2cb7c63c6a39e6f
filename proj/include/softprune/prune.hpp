// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "softprune/graph.hpp"

namespace softprune {

enum class Granularity { filter, weight };
enum class NormKind { l2, l1 };

/// What to prune and how much. An empty scope means every conv layer; the
/// classifier and all biases are never covered.
struct PruneConfig {
    double target_rate = 0.0;  // fraction pruned per layer, in [0, 1)
    Granularity granularity = Granularity::filter;
    NormKind norm = NormKind::l2;
    std::vector<std::string> scope;
    void validate(const ModelGraph& model) const;
};

/// Kept/pruned flags per covered layer. At filter granularity each entry has
/// one flag per output filter; at weight granularity one flag per weight.
struct FilterMask {
    Granularity granularity = Granularity::filter;
    std::map<std::string, std::vector<char>> kept;

    int pruned_count(const std::string& layer) const;
    bool covers(const std::string& layer) const { return kept.count(layer) != 0; }
};

/// Filters of one conv layer ordered by ascending norm; ties keep the lower
/// index first. Returns (filter index, norm) pairs.
std::vector<std::pair<int, double>> rank_filters(const ModelGraph& model, const std::string& layer, NormKind norm);

/// Marks the floor(n * rate) lowest-norm filters (or weights) of each layer
/// in scope as pruned.
FilterMask select_mask(const ModelGraph& model, const PruneConfig& config);

/// Scales every pruned entry by alpha in place. alpha = 1 keeps the model
/// untouched; alpha = 0 writes literal zeros, identical to multiplying by a
/// binary mask.
void apply_mask(ModelGraph& model, const FilterMask& mask, double alpha);

/// The decay step alpha * w expressed as one step of weight-level l2 shrink:
/// w - lambda * w with lambda = alpha0 - alpha, evaluated so the result is
/// bit-identical to alpha * w. alpha0 is the schedule's starting value.
/// Requires 0 <= alpha <= alpha0.
Tensor decay_step_as_regularization(const Tensor& weights, double alpha, double alpha0);

/// Physically removes pruned filters (filter granularity only). Downstream
/// conv input channels and classifier input columns are sliced to match, and
/// residual links gain channel maps so removed channels re-enter as zeros at
/// the additions. Pruned entries must already be exactly zero.
ModelGraph compact(const ModelGraph& model, const FilterMask& mask);

/// Text export, one "layer: i j k" line per covered layer (pruned indices,
/// ascending; bare "layer:" when nothing is pruned).
void save_mask(const FilterMask& mask, const std::string& path);
FilterMask load_mask(const std::string& path, const ModelGraph& model, Granularity granularity = Granularity::filter);

}  // namespace softprune
