// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "softprune/tensor.hpp"

namespace softprune {

/// Labeled image set. Images are [count, channels, h, w] with values in
/// [0, 1] as loaded; standardize() may move them out of that range later.
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    int classes = 0;
    std::string split;  // "train" or "test"

    int count() const;
    Tensor image(int i) const;  // copy of sample i as [channels, h, w]
    void validate() const;
};

/// Deterministic synthetic classification set: one random template per
/// class, samples are the template plus Gaussian noise, clamped to [0, 1].
/// The test split holds per_class/5 samples per class (at least one) drawn
/// after the training samples, so the splits are disjoint.
std::pair<Dataset, Dataset> synth_blobs(int classes, int per_class, int channels, int height, int width,
                                           double noise_sigma, std::uint64_t seed);

/// IDX-format image/label pair (the MNIST container layout): big-endian
/// magic + dims header, unsigned-byte payload. Pixels map to [0, 1] by /255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path);

/// CSV rows "label,p0,p1,...". Pixels are 0..255 and divide by 255; a row of
/// n pixels becomes [1, s, s] when n is a perfect square, else [1, 1, n].
Dataset load_csv(const std::string& path);

/// In-place per-channel standardization of both splits using the training
/// split's mean and standard deviation.
void standardize(Dataset& train, Dataset& test);

/// Horizontal mirror of one [c, h, w] image.
Tensor hflip(const Tensor& image);

}  // namespace softprune
