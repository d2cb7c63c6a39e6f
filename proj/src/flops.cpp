// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/flops.hpp"

#include <cmath>

#include "softprune/errors.hpp"
#include "softprune/kernels.hpp"

namespace softprune {

double FlopsReport::reduction_vs(const FlopsReport& baseline) const {
    if (baseline.total <= 0) throw InputError("baseline FLOPs total must be positive");
    return 1.0 - static_cast<double>(total) / static_cast<double>(baseline.total);
}

FlopsReport count_flops(const ModelGraph& model, double prune_rate, PruneScope scope) {
    if (!(prune_rate >= 0.0 && prune_rate <= 1.0))
        throw InputError("prune_rate must lie in [0, 1], got " + std::to_string(prune_rate));
    model.validate();

    const bool has_shortcuts = !model.residual_links.empty();
    const bool restore = scope.residual == PruneScope::Residual::restore;
    const bool floored = scope.widths == PruneScope::Widths::floored;

    auto kept = [&](int n) -> double {
        if (floored) return static_cast<double>(n - static_cast<int>(std::floor(n * prune_rate)));
        return n * (1.0 - prune_rate);
    };

    FlopsReport report;
    double params = 0.0;
    double total = 0.0;

    // Effective widths flow forward; `eff` may be fractional in continuous
    // mode. `full` tracks the unpruned width for the restore convention.
    double eff = static_cast<double>(model.input_shape[0]);
    int full = model.input_shape[0];
    int h = model.input_shape[1], w = model.input_shape[2];
    bool flattened = false;
    double eff_features = 0.0;
    bool first_conv = true;

    for (const auto& layer : model.layers) {
        switch (layer.kind) {
            case LayerKind::conv: {
                const int oh = kernels::conv_out_extent(h, layer.kernel_size, layer.stride, layer.padding);
                const int ow = kernels::conv_out_extent(w, layer.kernel_size, layer.stride, layer.padding);
                // The stem of a shortcut-carrying model is left at full width
                // under the reporting convention; its output channels are
                // what the first stage's shortcuts re-fill anyway.
                const bool exempt = first_conv && has_shortcuts && restore && !floored;
                const double eff_out = exempt ? static_cast<double>(layer.out_channels) : kept(layer.out_channels);
                const double macs = eff_out * oh * ow * eff * layer.kernel_size * layer.kernel_size;
                report.per_layer[layer.name] = static_cast<long long>(std::llround(macs));
                total += macs;
                params += eff_out * eff * layer.kernel_size * layer.kernel_size +
                          (layer.has_bias ? eff_out : 0.0);
                eff = eff_out;
                full = layer.out_channels;
                h = oh;
                w = ow;
                first_conv = false;
                break;
            }
            case LayerKind::dense: {
                double in_feats = flattened ? eff_features : eff;
                // The classifier is never pruned; under the restore
                // convention it also sees the restored full-width input.
                const double macs = static_cast<double>(layer.out_features) * in_feats;
                report.per_layer[layer.name] = static_cast<long long>(std::llround(macs));
                total += macs;
                params += static_cast<double>(layer.out_features) * in_feats +
                          (layer.has_bias ? layer.out_features : 0.0);
                eff = static_cast<double>(layer.out_features);
                full = layer.out_features;
                flattened = false;
                break;
            }
            case LayerKind::avgpool:
                h /= layer.window;
                w /= layer.window;
                break;
            case LayerKind::flatten:
                flattened = true;
                eff_features = eff * h * w;
                break;
            case LayerKind::residual_add:
                full = layer.out_channels;
                if (restore) eff = static_cast<double>(full);
                break;
            case LayerKind::relu:
            case LayerKind::identity:
                break;
        }
    }

    report.total = static_cast<long long>(std::llround(total));
    report.params_total = static_cast<long long>(std::llround(params));
    return report;
}

}  // namespace softprune
