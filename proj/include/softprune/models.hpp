// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "softprune/graph.hpp"

namespace softprune {

/// CIFAR-style residual network descriptor (parameters unset; call
/// init_params or load a checkpoint). depth must be 6k+2: three stages of k
/// two-conv blocks at widths 16/32/64, parameter-free shortcuts, global
/// average pooling and a 10-way classifier.
ModelGraph make_resnet_cifar(int depth, int classes = 10);

/// Small plain CNN for fast experiments: two 3x3 conv+relu+pool stages and a
/// dense classifier. height and width must be divisible by 4.
ModelGraph make_toy_cnn(int in_channels, int classes, int height = 12, int width = 12, int filters1 = 8,
                        int filters2 = 16);

}  // namespace softprune
