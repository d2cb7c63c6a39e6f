// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace softprune::kernels {

namespace {

void require(bool cond, const std::string& message) {
    if (!cond) throw DimensionError(message);
}

}  // namespace

int conv_out_extent(int extent, int kernel, int stride, int padding) {
    const int span = extent + 2 * padding - kernel;
    if (span < 0 || stride <= 0)
        throw DimensionError("conv window " + std::to_string(kernel) + " does not fit extent " +
                             std::to_string(extent) + " with padding " + std::to_string(padding));
    return span / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int stride, int padding) {
    require(input.rank() == 3, "conv input must be rank 3 [channels,h,w], got " + input.shape_string());
    require(kernel.rank() == 4, "conv kernel must be rank 4 [n,m,s,s], got " + kernel.shape_string());
    const int m = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int n = kernel.dim(0), km = kernel.dim(1), s = kernel.dim(2);
    require(kernel.dim(3) == s, "conv kernel must be square, got " + kernel.shape_string());
    require(km == m, "conv channel mismatch: input has " + std::to_string(m) +
                         " channels, kernel expects " + std::to_string(km));
    const int oh = conv_out_extent(h, s, stride, padding);
    const int ow = conv_out_extent(w, s, stride, padding);

    Tensor out(std::vector<int>{n, oh, ow});
    for (int j = 0; j < n; ++j) {
        double* out_plane = out.data() + static_cast<std::size_t>(j) * oh * ow;
        for (int c = 0; c < m; ++c) {
            const double* in_plane = input.data() + static_cast<std::size_t>(c) * h * w;
            for (int ky = 0; ky < s; ++ky) {
                for (int kx = 0; kx < s; ++kx) {
                    const double wgt = kernel.at4(j, c, ky, kx);
                    if (wgt == 0.0) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - padding;
                        if (iy < 0 || iy >= h) continue;
                        // valid ox range so that ix = ox*stride + kx - padding is in [0, w)
                        int ox0 = 0;
                        if (kx - padding < 0) ox0 = (padding - kx + stride - 1) / stride;
                        int ox1 = (w - 1 - kx + padding) / stride;  // inclusive
                        ox1 = std::min(ox1, ow - 1);
                        double* out_row = out_plane + static_cast<std::size_t>(oy) * ow;
                        const double* in_row = in_plane + static_cast<std::size_t>(iy) * w + kx - padding;
                        for (int ox = ox0; ox <= ox1; ++ox)
                            out_row[ox] += wgt * in_row[ox * stride];
                    }
                }
            }
        }
    }
    return out;
}

std::pair<Tensor, Tensor> conv2d_backward(const Tensor& input, const Tensor& kernel,
                                          const Tensor& grad_output, int stride, int padding) {
    const int m = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int n = kernel.dim(0), s = kernel.dim(2);
    require(kernel.dim(1) == m, "conv channel mismatch: input has " + std::to_string(m) +
                                    " channels, kernel expects " + std::to_string(kernel.dim(1)));
    const int oh = conv_out_extent(h, s, stride, padding);
    const int ow = conv_out_extent(w, s, stride, padding);
    require(grad_output.rank() == 3 && grad_output.dim(0) == n && grad_output.dim(1) == oh &&
                grad_output.dim(2) == ow,
            "grad_output shape " + grad_output.shape_string() + " does not match forward output [" +
                std::to_string(n) + "," + std::to_string(oh) + "," + std::to_string(ow) + "]");

    Tensor grad_input(std::vector<int>{m, h, w});
    Tensor grad_kernel(std::vector<int>{n, m, s, s});
    for (int j = 0; j < n; ++j) {
        const double* g_plane = grad_output.data() + static_cast<std::size_t>(j) * oh * ow;
        for (int c = 0; c < m; ++c) {
            const double* in_plane = input.data() + static_cast<std::size_t>(c) * h * w;
            double* gi_plane = grad_input.data() + static_cast<std::size_t>(c) * h * w;
            for (int ky = 0; ky < s; ++ky) {
                for (int kx = 0; kx < s; ++kx) {
                    const double wgt = kernel.at4(j, c, ky, kx);
                    double gk = 0.0;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - padding;
                        if (iy < 0 || iy >= h) continue;
                        int ox0 = 0;
                        if (kx - padding < 0) ox0 = (padding - kx + stride - 1) / stride;
                        int ox1 = (w - 1 - kx + padding) / stride;
                        ox1 = std::min(ox1, ow - 1);
                        const double* g_row = g_plane + static_cast<std::size_t>(oy) * ow;
                        const double* in_row = in_plane + static_cast<std::size_t>(iy) * w + kx - padding;
                        double* gi_row = gi_plane + static_cast<std::size_t>(iy) * w + kx - padding;
                        for (int ox = ox0; ox <= ox1; ++ox) {
                            const double g = g_row[ox];
                            gk += in_row[ox * stride] * g;
                            gi_row[ox * stride] += wgt * g;
                        }
                    }
                    grad_kernel.at4(j, c, ky, kx) = gk;
                }
            }
        }
    }
    return {std::move(grad_input), std::move(grad_kernel)};
}

Tensor dense_forward(const Tensor& input, const Tensor& weight) {
    require(input.rank() == 1, "dense input must be rank 1, got " + input.shape_string());
    require(weight.rank() == 2, "dense weight must be rank 2, got " + weight.shape_string());
    const int in = input.dim(0), out = weight.dim(0);
    require(weight.dim(1) == in, "dense feature mismatch: input has " + std::to_string(in) +
                                     " features, weight expects " + std::to_string(weight.dim(1)));
    Tensor y(std::vector<int>{out});
    for (int o = 0; o < out; ++o) {
        const double* row = weight.data() + static_cast<std::size_t>(o) * in;
        double acc = 0.0;
        for (int i = 0; i < in; ++i) acc += row[i] * input[i];
        y[o] = acc;
    }
    return y;
}

std::pair<Tensor, Tensor> dense_backward(const Tensor& input, const Tensor& weight,
                                         const Tensor& grad_output) {
    const int in = input.dim(0), out = weight.dim(0);
    require(weight.dim(1) == in, "dense feature mismatch: input has " + std::to_string(in) +
                                     " features, weight expects " + std::to_string(weight.dim(1)));
    require(grad_output.rank() == 1 && grad_output.dim(0) == out,
            "dense grad_output shape " + grad_output.shape_string() + " does not match [" +
                std::to_string(out) + "]");
    Tensor grad_input(std::vector<int>{in});
    Tensor grad_weight(std::vector<int>{out, in});
    for (int o = 0; o < out; ++o) {
        const double g = grad_output[o];
        const double* row = weight.data() + static_cast<std::size_t>(o) * in;
        double* grow = grad_weight.data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
            grow[i] = g * input[i];
            grad_input[i] += g * row[i];
        }
    }
    return {std::move(grad_input), std::move(grad_weight)};
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    require(input.same_shape(grad_output), "relu grad shape " + grad_output.shape_string() +
                                               " does not match input " + input.shape_string());
    Tensor out = grad_output;
    for (std::size_t i = 0; i < out.numel(); ++i)
        if (input[i] <= 0.0) out[i] = 0.0;
    return out;
}

Tensor avgpool_forward(const Tensor& input, int window) {
    require(input.rank() == 3, "avgpool input must be rank 3, got " + input.shape_string());
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    require(window > 0 && h % window == 0 && w % window == 0,
            "avgpool window " + std::to_string(window) + " must divide spatial dims of " +
                input.shape_string());
    const int oh = h / window, ow = w / window;
    const double scale = 1.0 / (static_cast<double>(window) * window);
    Tensor out(std::vector<int>{c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int dy = 0; dy < window; ++dy)
                    for (int dx = 0; dx < window; ++dx)
                        acc += input.at3(ch, oy * window + dy, ox * window + dx);
                out.at3(ch, oy, ox) = acc * scale;
            }
    return out;
}

Tensor avgpool_backward(const Tensor& input, const Tensor& grad_output, int window) {
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int oh = h / window, ow = w / window;
    require(grad_output.rank() == 3 && grad_output.dim(0) == c && grad_output.dim(1) == oh &&
                grad_output.dim(2) == ow,
            "avgpool grad shape " + grad_output.shape_string() + " does not match pooled output");
    const double scale = 1.0 / (static_cast<double>(window) * window);
    Tensor grad_input(std::vector<int>{c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                grad_input.at3(ch, y, x) = grad_output.at3(ch, y / window, x / window) * scale;
    return grad_input;
}

std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits, int label) {
    require(logits.rank() == 1, "logits must be rank 1, got " + logits.shape_string());
    const int classes = logits.dim(0);
    if (label < 0 || label >= classes)
        throw InputError("label " + std::to_string(label) + " outside [0, " +
                         std::to_string(classes) + ")");
    double max_logit = logits[0];
    for (int i = 1; i < classes; ++i) max_logit = std::max(max_logit, logits[i]);
    double sum = 0.0;
    Tensor grad(std::vector<int>{classes});
    for (int i = 0; i < classes; ++i) {
        grad[i] = std::exp(logits[i] - max_logit);
        sum += grad[i];
    }
    const double loss = std::log(sum) - (logits[static_cast<std::size_t>(label)] - max_logit);
    const double inv = 1.0 / sum;
    for (int i = 0; i < classes; ++i) grad[i] *= inv;
    grad[static_cast<std::size_t>(label)] -= 1.0;
    return {loss, std::move(grad)};
}

}  // namespace softprune::kernels
