// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softprune/tensor.hpp"

namespace softprune {

enum class LayerKind { conv, dense, relu, avgpool, identity, residual_add, flatten };

std::string layer_kind_name(LayerKind kind);

/// One layer of a model. Only the fields relevant to `kind` are meaningful.
struct LayerSpec {
    LayerKind kind = LayerKind::identity;
    std::string name;
    // conv
    int in_channels = 0, out_channels = 0, kernel_size = 0, stride = 1, padding = 0;
    // dense
    int in_features = 0, out_features = 0;
    // avgpool
    int window = 0;
    bool has_bias = false;
};

/// Shortcut wiring: the output of layer `from` is added into the output of
/// the residual_add layer `at`.
///
/// A plain descriptor leaves the channel maps empty (identity). Compacted
/// models use them to scatter a physically narrower branch back into the
/// full trunk width, zero-filling removed channels. If the source has fewer
/// channels than the trunk it is zero-padded at the top (parameter-free
/// shortcut), and if its spatial extent is twice the trunk's it is
/// subsampled with stride 2.
struct ResidualLink {
    std::string from;
    std::string at;
    int source_full_width = 0;            // channel width of the source point before compaction
    std::vector<int> main_channel_map;    // kept channels of the incoming main branch
    std::vector<int> source_channel_map;  // kept channels of the source branch
};

struct LayerParams {
    Tensor weight;
    std::optional<Tensor> bias;
};

/// Ordered layer graph with named parameters and residual wiring.
///
/// Parameters are read through weight()/bias() and mutated through the
/// mutable_ accessors, which bump a version counter used to detect stale
/// forward caches.
class ModelGraph {
public:
    std::vector<LayerSpec> layers;
    std::vector<ResidualLink> residual_links;
    std::vector<int> input_shape;  // {channels, h, w}

    void add_param(const std::string& name, Tensor weight, std::optional<Tensor> bias = std::nullopt);
    bool has_param(const std::string& name) const;
    const Tensor& weight(const std::string& name) const;
    const Tensor* bias(const std::string& name) const;  // nullptr if absent
    Tensor& mutable_weight(const std::string& name);
    Tensor* mutable_bias(const std::string& name);
    const std::map<std::string, LayerParams>& params() const { return params_; }

    std::uint64_t param_version() const { return version_; }

    int layer_index(const std::string& name) const;  // -1 if absent
    const ResidualLink* link_at(const std::string& add_layer_name) const;

    /// Checks name uniqueness and spec/parameter shape agreement.
    void validate() const;

private:
    std::map<std::string, LayerParams> params_;
    std::uint64_t version_ = 0;
};

/// Per-layer activations from a forward pass, consumed by backward().
struct ForwardCache {
    std::vector<Tensor> outputs;  // outputs[i] = output of layers[i]
    Tensor input;
    std::uint64_t model_version = 0;
    std::size_t layer_count = 0;
};

struct Gradients {
    std::map<std::string, Tensor> weights;
    std::map<std::string, Tensor> biases;
};

/// Runs the model on one input [c,h,w]; returns logits and the cache.
std::pair<Tensor, ForwardCache> forward(const ModelGraph& model, const Tensor& input);

/// Gradients of every trainable parameter given d(loss)/d(logits).
/// Throws StateError if the cache does not match the model's current state.
Gradients backward(const ModelGraph& model, const ForwardCache& cache, const Tensor& grad_logits);

/// He-style normal initialization of all weights (biases zero), deterministic
/// under seed.
void init_params(ModelGraph& model, std::uint64_t seed);

}  // namespace softprune
