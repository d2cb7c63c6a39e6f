// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "softprune/errors.hpp"

namespace softprune {

/// Dense n-dimensional array of doubles, row-major.
///
/// The single value type for weights, activations and gradients. Invariant:
/// product(shape) == data.size(). Kernels keep values finite on finite input.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(check_numel(shape_), 0.0);
    }

    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (check_numel(shape_) != data_.size())
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape product " +
                                 std::to_string(check_numel(shape_)));
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const {
        if (i < 0 || static_cast<std::size_t>(i) >= shape_.size())
            throw DimensionError("axis " + std::to_string(i) + " out of range for rank " +
                                 std::to_string(shape_.size()));
        return shape_[static_cast<std::size_t>(i)];
    }
    int rank() const { return static_cast<int>(shape_.size()); }
    int numel() const { return static_cast<int>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Indexed access for the ranks the kernels use.
    double& at3(int a, int b, int c) {
        return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }
    double at3(int a, int b, int c) const {
        return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }
    double& at4(int a, int b, int c, int d) {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }
    double at4(int a, int b, int c, int d) const {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    static std::size_t check_numel(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw DimensionError("non-positive dimension " + std::to_string(d));
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace softprune
