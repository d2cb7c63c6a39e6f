// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/graph.hpp"

#include <cmath>
#include <set>

#include "softprune/errors.hpp"
#include "softprune/kernels.hpp"
#include "softprune/rng.hpp"

namespace softprune {

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::avgpool: return "avgpool";
        case LayerKind::identity: return "identity";
        case LayerKind::residual_add: return "residual_add";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

void ModelGraph::add_param(const std::string& name, Tensor weight, std::optional<Tensor> bias) {
    params_[name] = LayerParams{std::move(weight), std::move(bias)};
    ++version_;
}

bool ModelGraph::has_param(const std::string& name) const { return params_.count(name) != 0; }

const Tensor& ModelGraph::weight(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("no parameters registered for layer '" + name + "'");
    return it->second.weight;
}

const Tensor* ModelGraph::bias(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("no parameters registered for layer '" + name + "'");
    return it->second.bias ? &*it->second.bias : nullptr;
}

Tensor& ModelGraph::mutable_weight(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("no parameters registered for layer '" + name + "'");
    ++version_;
    return it->second.weight;
}

Tensor* ModelGraph::mutable_bias(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("no parameters registered for layer '" + name + "'");
    ++version_;
    return it->second.bias ? &*it->second.bias : nullptr;
}

int ModelGraph::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].name == name) return static_cast<int>(i);
    return -1;
}

const ResidualLink* ModelGraph::link_at(const std::string& add_layer_name) const {
    for (const auto& link : residual_links)
        if (link.at == add_layer_name) return &link;
    return nullptr;
}

void ModelGraph::validate() const {
    if (input_shape.size() != 3)
        throw StateError("model input_shape must be {channels, h, w}");
    std::set<std::string> seen;
    for (const auto& layer : layers) {
        if (layer.name.empty()) throw StateError("layer with empty name");
        if (!seen.insert(layer.name).second)
            throw StateError("duplicate layer name '" + layer.name + "'");
        switch (layer.kind) {
            case LayerKind::conv: {
                const Tensor& w = weight(layer.name);
                if (w.rank() != 4 || w.dim(0) != layer.out_channels || w.dim(1) != layer.in_channels ||
                    w.dim(2) != layer.kernel_size || w.dim(3) != layer.kernel_size)
                    throw StateError("conv layer '" + layer.name + "': weight shape " + w.shape_string() +
                                     " does not match spec");
                const Tensor* b = bias(layer.name);
                if (layer.has_bias != (b != nullptr))
                    throw StateError("conv layer '" + layer.name + "': bias presence mismatch");
                if (b && (b->rank() != 1 || b->dim(0) != layer.out_channels))
                    throw StateError("conv layer '" + layer.name + "': bias shape mismatch");
                break;
            }
            case LayerKind::dense: {
                const Tensor& w = weight(layer.name);
                if (w.rank() != 2 || w.dim(0) != layer.out_features || w.dim(1) != layer.in_features)
                    throw StateError("dense layer '" + layer.name + "': weight shape " + w.shape_string() +
                                     " does not match spec");
                const Tensor* b = bias(layer.name);
                if (layer.has_bias != (b != nullptr))
                    throw StateError("dense layer '" + layer.name + "': bias presence mismatch");
                if (b && (b->rank() != 1 || b->dim(0) != layer.out_features))
                    throw StateError("dense layer '" + layer.name + "': bias shape mismatch");
                break;
            }
            case LayerKind::residual_add: {
                if (!link_at(layer.name))
                    throw StateError("residual_add layer '" + layer.name + "' has no residual link");
                break;
            }
            default: break;
        }
    }
    for (const auto& link : residual_links) {
        int src = layer_index(link.from);
        int dst = layer_index(link.at);
        if (src < 0) throw StateError("residual link references unknown source layer '" + link.from + "'");
        if (dst < 0) throw StateError("residual link references unknown add layer '" + link.at + "'");
        if (src >= dst)
            throw StateError("residual link source '" + link.from + "' does not precede add '" + link.at + "'");
        if (layers[dst].kind != LayerKind::residual_add)
            throw StateError("residual link target '" + link.at + "' is not a residual_add layer");
    }
}

namespace {

// Scatters `branch` [k,h,w] into `trunk_width` channels via `channel_map`
// (empty map = identity, requires k == trunk_width), zero-padding channels
// beyond `source_width` and subsampling 2x spatial excess with stride 2.
// Adds the result into `acc` in place.
void add_branch(Tensor& acc, const Tensor& branch, const std::vector<int>& channel_map, int source_width,
                const std::string& layer_name) {
    const int tw = acc.dim(0), th = acc.dim(1), twd = acc.dim(2);
    const int bc = branch.dim(0), bh = branch.dim(1), bw = branch.dim(2);
    int stride = 1;
    if (bh == th && bw == twd) {
        stride = 1;
    } else if (bh == 2 * th && bw == 2 * twd) {
        stride = 2;
    } else {
        throw DimensionError("residual add '" + layer_name + "': branch extent " + branch.shape_string() +
                             " is incompatible with trunk extent " + acc.shape_string());
    }
    if (source_width > tw)
        throw DimensionError("residual add '" + layer_name + "': source width " + std::to_string(source_width) +
                             " exceeds trunk width " + std::to_string(tw));
    if (channel_map.empty()) {
        if (bc != source_width)
            throw DimensionError("residual add '" + layer_name + "': branch has " + std::to_string(bc) +
                                 " channels, expected " + std::to_string(source_width));
        for (int c = 0; c < bc; ++c)
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < twd; ++x) acc.at3(c, y, x) += branch.at3(c, y * stride, x * stride);
    } else {
        if (static_cast<int>(channel_map.size()) != bc)
            throw DimensionError("residual add '" + layer_name + "': channel map covers " +
                                 std::to_string(channel_map.size()) + " channels, branch has " + std::to_string(bc));
        for (int c = 0; c < bc; ++c) {
            int dst = channel_map[static_cast<std::size_t>(c)];
            if (dst < 0 || dst >= tw)
                throw DimensionError("residual add '" + layer_name + "': channel map entry " + std::to_string(dst) +
                                     " outside trunk width " + std::to_string(tw));
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < twd; ++x) acc.at3(dst, y, x) += branch.at3(c, y * stride, x * stride);
        }
    }
}

// Transpose of add_branch: gathers the gradient flowing to a branch from the
// trunk gradient.
Tensor gather_branch_grad(const Tensor& trunk_grad, const std::vector<int>& branch_shape,
                          const std::vector<int>& channel_map, const std::string& layer_name) {
    Tensor g = Tensor::zeros(branch_shape);
    const int th = trunk_grad.dim(1), twd = trunk_grad.dim(2);
    const int bc = branch_shape[0], bh = branch_shape[1];
    const int stride = (bh == 2 * th) ? 2 : 1;
    (void)layer_name;
    for (int c = 0; c < bc; ++c) {
        int src = channel_map.empty() ? c : channel_map[static_cast<std::size_t>(c)];
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < twd; ++x) g.at3(c, y * stride, x * stride) = trunk_grad.at3(src, y, x);
    }
    return g;
}

void check_rank3(const Tensor& t, const LayerSpec& layer) {
    if (t.rank() != 3)
        throw DimensionError("layer '" + layer.name + "' (" + layer_kind_name(layer.kind) +
                             ") expects a rank-3 input, got " + t.shape_string());
}

}  // namespace

std::pair<Tensor, ForwardCache> forward(const ModelGraph& model, const Tensor& input) {
    if (input.rank() != 3 || input.dim(0) != model.input_shape[0] || input.dim(1) != model.input_shape[1] ||
        input.dim(2) != model.input_shape[2]) {
        std::string want = "[" + std::to_string(model.input_shape[0]) + "," + std::to_string(model.input_shape[1]) +
                           "," + std::to_string(model.input_shape[2]) + "]";
        throw DimensionError("model input shape " + input.shape_string() + " does not match expected " + want);
    }
    ForwardCache cache;
    cache.input = input;
    cache.model_version = model.param_version();
    cache.layer_count = model.layers.size();
    cache.outputs.reserve(model.layers.size());

    const Tensor* cur = &input;
    for (const auto& layer : model.layers) {
        Tensor out;
        switch (layer.kind) {
            case LayerKind::conv: {
                check_rank3(*cur, layer);
                if (cur->dim(0) != layer.in_channels)
                    throw DimensionError("conv layer '" + layer.name + "': input has " + std::to_string(cur->dim(0)) +
                                         " channels, expected " + std::to_string(layer.in_channels));
                out = kernels::conv2d_forward(*cur, model.weight(layer.name), layer.stride, layer.padding);
                if (const Tensor* b = model.bias(layer.name)) {
                    const int plane = out.dim(1) * out.dim(2);
                    double* d = out.data();
                    for (int j = 0; j < out.dim(0); ++j) {
                        const double bj = b->values()[static_cast<std::size_t>(j)];
                        for (int p = 0; p < plane; ++p) d[j * plane + p] += bj;
                    }
                }
                break;
            }
            case LayerKind::dense: {
                if (cur->rank() != 1 || cur->dim(0) != layer.in_features)
                    throw DimensionError("dense layer '" + layer.name + "': input " + cur->shape_string() +
                                         " does not match in_features " + std::to_string(layer.in_features));
                out = kernels::dense_forward(*cur, model.weight(layer.name));
                if (const Tensor* b = model.bias(layer.name)) {
                    for (int j = 0; j < out.dim(0); ++j) out[static_cast<std::size_t>(j)] += b->values()[static_cast<std::size_t>(j)];
                }
                break;
            }
            case LayerKind::relu:
                out = kernels::relu_forward(*cur);
                break;
            case LayerKind::avgpool:
                check_rank3(*cur, layer);
                out = kernels::avgpool_forward(*cur, layer.window);
                break;
            case LayerKind::identity:
                out = *cur;
                break;
            case LayerKind::flatten: {
                check_rank3(*cur, layer);
                out = Tensor({static_cast<int>(cur->numel())}, cur->values());
                break;
            }
            case LayerKind::residual_add: {
                check_rank3(*cur, layer);
                const ResidualLink* link = model.link_at(layer.name);
                if (!link) throw StateError("residual_add layer '" + layer.name + "' has no residual link");
                int src_idx = model.layer_index(link->from);
                if (src_idx < 0 || static_cast<std::size_t>(src_idx) >= cache.outputs.size())
                    throw StateError("residual add '" + layer.name + "': source '" + link->from +
                                     "' has not been evaluated");
                const Tensor& src = cache.outputs[static_cast<std::size_t>(src_idx)];
                const int trunk_w = layer.out_channels;
                out = Tensor::zeros({trunk_w, cur->dim(1), cur->dim(2)});
                // Main branch first, then the shortcut; fixed order keeps
                // summation bit-stable.
                add_branch(out, *cur, link->main_channel_map, trunk_w, layer.name);
                add_branch(out, src, link->source_channel_map, link->source_full_width, layer.name);
                break;
            }
        }
        cache.outputs.push_back(std::move(out));
        cur = &cache.outputs.back();
    }
    if (cache.outputs.empty()) throw StateError("model has no layers");
    return {cache.outputs.back(), cache};
}

Gradients backward(const ModelGraph& model, const ForwardCache& cache, const Tensor& grad_logits) {
    if (cache.model_version != model.param_version() || cache.layer_count != model.layers.size())
        throw StateError("forward cache is stale: model parameters changed since the pass was recorded");
    const int n = static_cast<int>(model.layers.size());
    if (grad_logits.shape() != cache.outputs.back().shape())
        throw DimensionError("grad_logits shape " + grad_logits.shape_string() + " does not match model output " +
                             cache.outputs.back().shape_string());

    // grad w.r.t. each layer's output, accumulated as consumers are visited.
    std::vector<Tensor> gout(static_cast<std::size_t>(n));
    auto accumulate = [&](int idx, const Tensor& g) {
        Tensor& slot = gout[static_cast<std::size_t>(idx)];
        if (slot.numel() == 0) {
            slot = g;
        } else {
            double* d = slot.data();
            const double* s = g.values().data();
            for (int i = 0; i < slot.numel(); ++i) d[i] += s[i];
        }
    };

    Gradients grads;
    gout[static_cast<std::size_t>(n - 1)] = grad_logits;
    Tensor grad_input_unused;

    for (int i = n - 1; i >= 0; --i) {
        const auto& layer = model.layers[static_cast<std::size_t>(i)];
        Tensor& g = gout[static_cast<std::size_t>(i)];
        if (g.numel() == 0) g = Tensor::zeros(cache.outputs[static_cast<std::size_t>(i)].shape());
        const Tensor& in = (i == 0) ? cache.input : cache.outputs[static_cast<std::size_t>(i - 1)];
        auto push_to_prev = [&](const Tensor& gi) {
            if (i == 0)
                grad_input_unused = gi;
            else
                accumulate(i - 1, gi);
        };
        switch (layer.kind) {
            case LayerKind::conv: {
                auto [gi, gw] = kernels::conv2d_backward(in, model.weight(layer.name), g, layer.stride, layer.padding);
                grads.weights[layer.name] = std::move(gw);
                if (model.bias(layer.name)) {
                    Tensor gb = Tensor::zeros({layer.out_channels});
                    const int plane = g.dim(1) * g.dim(2);
                    for (int j = 0; j < layer.out_channels; ++j) {
                        double s = 0.0;
                        for (int p = 0; p < plane; ++p) s += g.values()[static_cast<std::size_t>(j * plane + p)];
                        gb[static_cast<std::size_t>(j)] = s;
                    }
                    grads.biases[layer.name] = std::move(gb);
                }
                push_to_prev(gi);
                break;
            }
            case LayerKind::dense: {
                auto [gi, gw] = kernels::dense_backward(in, model.weight(layer.name), g);
                grads.weights[layer.name] = std::move(gw);
                if (model.bias(layer.name)) grads.biases[layer.name] = g;
                push_to_prev(gi);
                break;
            }
            case LayerKind::relu:
                push_to_prev(kernels::relu_backward(in, g));
                break;
            case LayerKind::avgpool:
                push_to_prev(kernels::avgpool_backward(in, g, layer.window));
                break;
            case LayerKind::identity:
                push_to_prev(g);
                break;
            case LayerKind::flatten:
                push_to_prev(Tensor(in.shape(), g.values()));
                break;
            case LayerKind::residual_add: {
                const ResidualLink* link = model.link_at(layer.name);
                int src_idx = model.layer_index(link->from);
                const Tensor& src_out = cache.outputs[static_cast<std::size_t>(src_idx)];
                push_to_prev(gather_branch_grad(g, in.shape(), link->main_channel_map, layer.name));
                accumulate(src_idx, gather_branch_grad(g, src_out.shape(), link->source_channel_map, layer.name));
                break;
            }
        }
    }
    return grads;
}

void init_params(ModelGraph& model, std::uint64_t seed) {
    Rng rng(seed);
    for (const auto& layer : model.layers) {
        if (layer.kind == LayerKind::conv) {
            double fan_in = static_cast<double>(layer.in_channels) * layer.kernel_size * layer.kernel_size;
            double stddev = std::sqrt(2.0 / fan_in);
            Tensor w({layer.out_channels, layer.in_channels, layer.kernel_size, layer.kernel_size});
            for (int i = 0; i < w.numel(); ++i) w[static_cast<std::size_t>(i)] = rng.normal() * stddev;
            if (layer.has_bias)
                model.add_param(layer.name, std::move(w), Tensor::zeros({layer.out_channels}));
            else
                model.add_param(layer.name, std::move(w));
        } else if (layer.kind == LayerKind::dense) {
            double stddev = std::sqrt(2.0 / static_cast<double>(layer.in_features));
            Tensor w({layer.out_features, layer.in_features});
            for (int i = 0; i < w.numel(); ++i) w[static_cast<std::size_t>(i)] = rng.normal() * stddev;
            if (layer.has_bias)
                model.add_param(layer.name, std::move(w), Tensor::zeros({layer.out_features}));
            else
                model.add_param(layer.name, std::move(w));
        }
    }
}

}  // namespace softprune
