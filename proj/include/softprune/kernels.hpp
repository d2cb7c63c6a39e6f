// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "softprune/tensor.hpp"

namespace softprune::kernels {

/// Output spatial size: floor((extent + 2*padding - kernel) / stride) + 1.
/// Throws DimensionError if non-positive.
int conv_out_extent(int extent, int kernel, int stride, int padding);

/// 2-D cross-correlation. input [m,h,w], kernel [n,m,s,s] -> [n,h',w'].
/// No bias; channel j of the output is input correlated with filter j.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int stride, int padding);

/// Analytic gradients of conv2d_forward w.r.t. input and kernel.
std::pair<Tensor, Tensor> conv2d_backward(const Tensor& input, const Tensor& kernel,
                                          const Tensor& grad_output, int stride, int padding);

/// weight [out,in] * x [in] -> [out].
Tensor dense_forward(const Tensor& input, const Tensor& weight);

/// Returns (grad_input [in], grad_weight [out,in]).
std::pair<Tensor, Tensor> dense_backward(const Tensor& input, const Tensor& weight,
                                         const Tensor& grad_output);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

/// Non-overlapping window average over [c,h,w]; window must divide h and w.
Tensor avgpool_forward(const Tensor& input, int window);
Tensor avgpool_backward(const Tensor& input, const Tensor& grad_output, int window);

/// Stable softmax cross-entropy on a logits vector.
/// Returns (loss, grad of loss w.r.t. logits). Throws InputError on a label
/// outside [0, classes).
std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits, int label);

}  // namespace softprune::kernels
