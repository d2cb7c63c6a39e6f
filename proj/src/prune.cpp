// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/prune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "softprune/errors.hpp"
#include "softprune/kernels.hpp"

namespace softprune {

namespace {

std::vector<std::string> scope_layers(const ModelGraph& model, const PruneConfig& config) {
    if (!config.scope.empty()) return config.scope;
    std::vector<std::string> out;
    for (const auto& layer : model.layers)
        if (layer.kind == LayerKind::conv) out.push_back(layer.name);
    return out;
}

const LayerSpec& conv_layer(const ModelGraph& model, const std::string& name) {
    int idx = model.layer_index(name);
    if (idx < 0) throw InputError("unknown layer '" + name + "'");
    const LayerSpec& layer = model.layers[static_cast<std::size_t>(idx)];
    if (layer.kind != LayerKind::conv)
        throw InputError("layer '" + name + "' is " + layer_kind_name(layer.kind) + ", not conv");
    return layer;
}

}  // namespace

void PruneConfig::validate(const ModelGraph& model) const {
    if (!(target_rate >= 0.0 && target_rate < 1.0))
        throw ConfigError("prune rate must lie in [0, 1), got " + std::to_string(target_rate));
    for (const auto& name : scope) conv_layer(model, name);
}

int FilterMask::pruned_count(const std::string& layer) const {
    auto it = kept.find(layer);
    if (it == kept.end()) throw InputError("mask does not cover layer '" + layer + "'");
    return static_cast<int>(std::count(it->second.begin(), it->second.end(), char(0)));
}

std::vector<std::pair<int, double>> rank_filters(const ModelGraph& model, const std::string& layer_name,
                                                 NormKind norm) {
    const LayerSpec& layer = conv_layer(model, layer_name);
    const Tensor& w = model.weight(layer_name);
    const int n = layer.out_channels;
    const int slice = w.numel() / n;
    std::vector<std::pair<int, double>> ranked(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double* f = w.values().data() + static_cast<std::size_t>(j) * slice;
        double acc = 0.0;
        if (norm == NormKind::l2) {
            for (int i = 0; i < slice; ++i) acc += f[i] * f[i];
            acc = std::sqrt(acc);
        } else {
            for (int i = 0; i < slice; ++i) acc += std::abs(f[i]);
        }
        ranked[static_cast<std::size_t>(j)] = {j, acc};
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    return ranked;
}

FilterMask select_mask(const ModelGraph& model, const PruneConfig& config) {
    config.validate(model);
    FilterMask mask;
    mask.granularity = config.granularity;
    for (const auto& name : scope_layers(model, config)) {
        const LayerSpec& layer = conv_layer(model, name);
        if (config.granularity == Granularity::filter) {
            const int n = layer.out_channels;
            const int k = static_cast<int>(std::floor(n * config.target_rate));
            auto ranked = rank_filters(model, name, config.norm);
            std::vector<char> kept(static_cast<std::size_t>(n), char(1));
            for (int i = 0; i < k; ++i) kept[static_cast<std::size_t>(ranked[static_cast<std::size_t>(i)].first)] = 0;
            mask.kept[name] = std::move(kept);
        } else {
            const Tensor& w = model.weight(name);
            const int total = w.numel();
            const int k = static_cast<int>(std::floor(total * config.target_rate));
            std::vector<int> order(static_cast<std::size_t>(total));
            std::iota(order.begin(), order.end(), 0);
            const double* d = w.values().data();
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return std::abs(d[a]) < std::abs(d[b]); });
            std::vector<char> kept(static_cast<std::size_t>(total), char(1));
            for (int i = 0; i < k; ++i) kept[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 0;
            mask.kept[name] = std::move(kept);
        }
    }
    return mask;
}

void apply_mask(ModelGraph& model, const FilterMask& mask, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0) || !std::isfinite(alpha))
        throw InputError("alpha must lie in [0, 1], got " + std::to_string(alpha));
    for (const auto& [name, kept] : mask.kept) {
        const LayerSpec& layer = conv_layer(model, name);
        Tensor& w = model.mutable_weight(name);
        if (mask.granularity == Granularity::filter) {
            if (static_cast<int>(kept.size()) != layer.out_channels)
                throw DimensionError("mask for '" + name + "' covers " + std::to_string(kept.size()) +
                                     " filters, layer has " + std::to_string(layer.out_channels));
            const int slice = w.numel() / layer.out_channels;
            double* d = w.data();
            for (int j = 0; j < layer.out_channels; ++j) {
                if (kept[static_cast<std::size_t>(j)]) continue;
                double* f = d + static_cast<std::size_t>(j) * slice;
                if (alpha == 0.0) {
                    for (int i = 0; i < slice; ++i) f[i] = 0.0;
                } else {
                    for (int i = 0; i < slice; ++i) f[i] *= alpha;
                }
            }
            if (Tensor* b = model.mutable_bias(name)) {
                for (int j = 0; j < layer.out_channels; ++j) {
                    if (kept[static_cast<std::size_t>(j)]) continue;
                    double& v = (*b)[static_cast<std::size_t>(j)];
                    v = (alpha == 0.0) ? 0.0 : v * alpha;
                }
            }
        } else {
            if (static_cast<int>(kept.size()) != w.numel())
                throw DimensionError("mask for '" + name + "' covers " + std::to_string(kept.size()) +
                                     " weights, layer has " + std::to_string(w.numel()));
            double* d = w.data();
            for (int i = 0; i < w.numel(); ++i) {
                if (kept[static_cast<std::size_t>(i)]) continue;
                d[i] = (alpha == 0.0) ? 0.0 : d[i] * alpha;
            }
        }
    }
}

Tensor decay_step_as_regularization(const Tensor& weights, double alpha, double alpha0) {
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw InputError("alpha0 must be positive and finite");
    if (!(alpha >= 0.0 && alpha <= alpha0))
        throw InputError("alpha must lie in [0, alpha0], got " + std::to_string(alpha));
    // One shrink step w - lambda*w. The rounding error of lambda itself is
    // recovered exactly (two-term sum; alpha0 dominates alpha), and the
    // shrink is applied with the error folded back in, so the survivor of
    // (1 - lambda_exact) is the intended retention factor to the last bit.
    const double lambda = alpha0 - alpha;
    const double hi = alpha0 - lambda;       // exact
    const double lambda_err = hi - alpha;    // exact: lambda + lambda_err == alpha0 - alpha
    const double keep = hi - lambda_err;
    Tensor out(weights.shape());
    const double* src = weights.values().data();
    double* dst = out.data();
    for (int i = 0; i < weights.numel(); ++i) dst[i] = keep * src[i];
    return out;
}

namespace {

std::vector<int> identity_keep(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

bool is_full(const std::vector<int>& keep, int full) {
    return static_cast<int>(keep.size()) == full;
}

}  // namespace

ModelGraph compact(const ModelGraph& model, const FilterMask& mask) {
    if (mask.granularity != Granularity::filter)
        throw UnsupportedError("compact requires a filter-granularity mask; weight-level pruning keeps the dense layout");
    model.validate();

    // Kept filter indices per conv layer; pruned filters must have decayed
    // all the way to zero before removal is sound.
    std::map<std::string, std::vector<int>> kept_filters;
    for (const auto& [name, kept] : mask.kept) {
        const LayerSpec& layer = conv_layer(model, name);
        if (static_cast<int>(kept.size()) != layer.out_channels)
            throw DimensionError("mask for '" + name + "' covers " + std::to_string(kept.size()) +
                                 " filters, layer has " + std::to_string(layer.out_channels));
        const Tensor& w = model.weight(name);
        const int slice = w.numel() / layer.out_channels;
        std::vector<int> keep;
        for (int j = 0; j < layer.out_channels; ++j) {
            if (kept[static_cast<std::size_t>(j)]) {
                keep.push_back(j);
                continue;
            }
            const double* f = w.values().data() + static_cast<std::size_t>(j) * slice;
            for (int i = 0; i < slice; ++i)
                if (f[i] != 0.0)
                    throw StateError("cannot compact '" + name + "': pruned filter " + std::to_string(j) +
                                     " still has nonzero weights");
            if (const Tensor* b = model.bias(name)) {
                if (b->values()[static_cast<std::size_t>(j)] != 0.0)
                    throw StateError("cannot compact '" + name + "': pruned filter " + std::to_string(j) +
                                     " still has a nonzero bias");
            }
        }
        if (keep.empty())
            throw StateError("cannot compact '" + name + "': every filter is pruned");
        kept_filters[name] = std::move(keep);
    }

    ModelGraph out;
    out.input_shape = model.input_shape;

    std::vector<std::vector<int>> keep_after(model.layers.size());
    std::vector<int> full_after(model.layers.size());

    std::vector<int> cur_keep = identity_keep(model.input_shape[0]);
    int cur_full = model.input_shape[0];
    int h = model.input_shape[1], w = model.input_shape[2];
    std::vector<int> feature_keep;
    int feature_full = 0;
    bool flattened = false;

    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& layer = model.layers[li];
        LayerSpec spec = layer;
        switch (layer.kind) {
            case LayerKind::conv: {
                auto it = kept_filters.find(layer.name);
                std::vector<int> keep_out =
                    (it != kept_filters.end()) ? it->second : identity_keep(layer.out_channels);
                const Tensor& wt = model.weight(layer.name);
                const int k = layer.kernel_size;
                Tensor nw({static_cast<int>(keep_out.size()), static_cast<int>(cur_keep.size()), k, k});
                for (std::size_t a = 0; a < keep_out.size(); ++a)
                    for (std::size_t b = 0; b < cur_keep.size(); ++b)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                nw.at4(static_cast<int>(a), static_cast<int>(b), ky, kx) =
                                    wt.at4(keep_out[a], cur_keep[b], ky, kx);
                spec.in_channels = static_cast<int>(cur_keep.size());
                spec.out_channels = static_cast<int>(keep_out.size());
                if (const Tensor* b = model.bias(layer.name)) {
                    Tensor nb({spec.out_channels});
                    for (std::size_t a = 0; a < keep_out.size(); ++a)
                        nb[a] = b->values()[static_cast<std::size_t>(keep_out[a])];
                    out.add_param(layer.name, std::move(nw), std::move(nb));
                } else {
                    out.add_param(layer.name, std::move(nw));
                }
                cur_keep = std::move(keep_out);
                cur_full = layer.out_channels;
                h = kernels::conv_out_extent(h, k, layer.stride, layer.padding);
                w = kernels::conv_out_extent(w, k, layer.stride, layer.padding);
                break;
            }
            case LayerKind::dense: {
                const Tensor& wt = model.weight(layer.name);
                const std::vector<int>& in_keep = flattened ? feature_keep : cur_keep;
                const int in_full = flattened ? feature_full : cur_full;
                if (wt.dim(1) != in_full)
                    throw StateError("dense layer '" + layer.name + "' expects " + std::to_string(wt.dim(1)) +
                                     " inputs, graph provides " + std::to_string(in_full));
                Tensor nw({layer.out_features, static_cast<int>(in_keep.size())});
                for (int r = 0; r < layer.out_features; ++r)
                    for (std::size_t c = 0; c < in_keep.size(); ++c)
                        nw[static_cast<std::size_t>(r) * in_keep.size() + c] =
                            wt.values()[static_cast<std::size_t>(r) * in_full + in_keep[c]];
                spec.in_features = static_cast<int>(in_keep.size());
                if (const Tensor* b = model.bias(layer.name))
                    out.add_param(layer.name, std::move(nw), *b);
                else
                    out.add_param(layer.name, std::move(nw));
                cur_keep = identity_keep(layer.out_features);
                cur_full = layer.out_features;
                flattened = false;
                break;
            }
            case LayerKind::avgpool:
                h /= layer.window;
                w /= layer.window;
                break;
            case LayerKind::flatten: {
                feature_keep.clear();
                for (int c : cur_keep)
                    for (int p = 0; p < h * w; ++p) feature_keep.push_back(c * h * w + p);
                feature_full = cur_full * h * w;
                flattened = true;
                break;
            }
            case LayerKind::residual_add: {
                const ResidualLink* link = model.link_at(layer.name);
                const int src_idx = model.layer_index(link->from);
                const std::vector<int>& src_keep = keep_after[static_cast<std::size_t>(src_idx)];
                const int src_full = full_after[static_cast<std::size_t>(src_idx)];
                ResidualLink nl;
                nl.from = link->from;
                nl.at = link->at;
                nl.source_full_width = src_full;
                if (!is_full(cur_keep, layer.out_channels)) nl.main_channel_map = cur_keep;
                if (!is_full(src_keep, src_full)) nl.source_channel_map = src_keep;
                out.residual_links.push_back(std::move(nl));
                spec.in_channels = static_cast<int>(cur_keep.size());
                // The addition restores the full trunk width; removed
                // channels re-enter as zeros.
                cur_keep = identity_keep(layer.out_channels);
                cur_full = layer.out_channels;
                break;
            }
            case LayerKind::relu:
            case LayerKind::identity:
                break;
        }
        out.layers.push_back(std::move(spec));
        keep_after[li] = cur_keep;
        full_after[li] = cur_full;
    }

    out.validate();
    return out;
}

void save_mask(const FilterMask& mask, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot open '" + path + "' for writing");
    for (const auto& [name, kept] : mask.kept) {
        f << name << ":";
        for (std::size_t i = 0; i < kept.size(); ++i)
            if (!kept[i]) f << " " << i;
        f << "\n";
    }
    if (!f) throw InputError("write to '" + path + "' failed");
}

FilterMask load_mask(const std::string& path, const ModelGraph& model, Granularity granularity) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open mask file '" + path + "'");
    FilterMask mask;
    mask.granularity = granularity;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError("mask file '" + path + "' line " + std::to_string(line_no) + ": missing ':'");
        std::string name = line.substr(0, colon);
        const LayerSpec& layer = conv_layer(model, name);
        const int extent =
            granularity == Granularity::filter ? layer.out_channels : model.weight(name).numel();
        if (mask.kept.count(name))
            throw ParseError("mask file '" + path + "' line " + std::to_string(line_no) + ": duplicate layer '" +
                             name + "'");
        std::vector<char> kept(static_cast<std::size_t>(extent), char(1));
        std::istringstream rest(line.substr(colon + 1));
        long long idx;
        while (rest >> idx) {
            if (idx < 0 || idx >= extent)
                throw ParseError("mask file '" + path + "' line " + std::to_string(line_no) + ": index " +
                                 std::to_string(idx) + " outside [0, " + std::to_string(extent) + ")");
            kept[static_cast<std::size_t>(idx)] = 0;
        }
        if (!rest.eof())
            throw ParseError("mask file '" + path + "' line " + std::to_string(line_no) + ": malformed index list");
        mask.kept[name] = std::move(kept);
    }
    return mask;
}

}  // namespace softprune
