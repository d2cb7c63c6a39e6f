// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/models.hpp"

#include <string>

#include "softprune/errors.hpp"

namespace softprune {

namespace {

LayerSpec conv_spec(std::string name, int in_ch, int out_ch, int stride) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.name = std::move(name);
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel_size = 3;
    s.stride = stride;
    s.padding = 1;
    s.has_bias = false;
    return s;
}

LayerSpec relu_spec(std::string name) {
    LayerSpec s;
    s.kind = LayerKind::relu;
    s.name = std::move(name);
    return s;
}

}  // namespace

ModelGraph make_resnet_cifar(int depth, int classes) {
    if (depth < 8 || (depth - 2) % 6 != 0)
        throw InputError("residual depth must be 6k+2 with k >= 1, got " + std::to_string(depth));
    if (classes < 2) throw InputError("classes must be >= 2");
    const int blocks_per_stage = (depth - 2) / 6;

    ModelGraph m;
    m.input_shape = {3, 32, 32};
    m.layers.push_back(conv_spec("stem", 3, 16, 1));
    m.layers.push_back(relu_spec("stem_relu"));

    std::string trunk = "stem_relu";
    int prev_width = 16;
    for (int stage = 1; stage <= 3; ++stage) {
        const int width = 16 << (stage - 1);
        for (int b = 1; b <= blocks_per_stage; ++b) {
            const std::string p = "s" + std::to_string(stage) + "b" + std::to_string(b);
            const int stride = (stage > 1 && b == 1) ? 2 : 1;
            m.layers.push_back(conv_spec(p + "c1", prev_width, width, stride));
            m.layers.push_back(relu_spec(p + "r1"));
            m.layers.push_back(conv_spec(p + "c2", width, width, 1));
            LayerSpec add;
            add.kind = LayerKind::residual_add;
            add.name = p + "add";
            add.in_channels = width;
            add.out_channels = width;
            m.layers.push_back(add);
            m.layers.push_back(relu_spec(p + "r2"));
            ResidualLink link;
            link.from = trunk;
            link.at = add.name;
            link.source_full_width = prev_width;
            m.residual_links.push_back(link);
            trunk = p + "r2";
            prev_width = width;
        }
    }

    LayerSpec pool;
    pool.kind = LayerKind::avgpool;
    pool.name = "avgpool";
    pool.window = 8;
    m.layers.push_back(pool);

    LayerSpec flat;
    flat.kind = LayerKind::flatten;
    flat.name = "flatten";
    m.layers.push_back(flat);

    LayerSpec fc;
    fc.kind = LayerKind::dense;
    fc.name = "fc";
    fc.in_features = 64;
    fc.out_features = classes;
    fc.has_bias = true;
    m.layers.push_back(fc);
    return m;
}

ModelGraph make_toy_cnn(int in_channels, int classes, int height, int width, int filters1, int filters2) {
    if (in_channels < 1) throw InputError("in_channels must be >= 1");
    if (classes < 2) throw InputError("classes must be >= 2");
    if (height % 4 != 0 || width % 4 != 0)
        throw InputError("toy cnn input extent must be divisible by 4, got " + std::to_string(height) + "x" +
                         std::to_string(width));
    if (filters1 < 1 || filters2 < 1) throw InputError("filter counts must be >= 1");

    ModelGraph m;
    m.input_shape = {in_channels, height, width};
    m.layers.push_back(conv_spec("conv1", in_channels, filters1, 1));
    m.layers.push_back(relu_spec("relu1"));
    LayerSpec pool1;
    pool1.kind = LayerKind::avgpool;
    pool1.name = "pool1";
    pool1.window = 2;
    m.layers.push_back(pool1);
    m.layers.push_back(conv_spec("conv2", filters1, filters2, 1));
    m.layers.push_back(relu_spec("relu2"));
    LayerSpec pool2 = pool1;
    pool2.name = "pool2";
    m.layers.push_back(pool2);
    LayerSpec flat;
    flat.kind = LayerKind::flatten;
    flat.name = "flatten";
    m.layers.push_back(flat);
    LayerSpec fc;
    fc.kind = LayerKind::dense;
    fc.name = "fc";
    fc.in_features = filters2 * (height / 4) * (width / 4);
    fc.out_features = classes;
    fc.has_bias = true;
    m.layers.push_back(fc);
    return m;
}

}  // namespace softprune
