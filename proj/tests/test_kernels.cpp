// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "softprune/errors.hpp"
#include "softprune/kernels.hpp"
#include "softprune/rng.hpp"

using namespace softprune;
namespace k = softprune::kernels;

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double scale = 1.0) {
    Tensor t(shape);
    for (int i = 0; i < t.numel(); ++i) t[static_cast<std::size_t>(i)] = rng.normal() * scale;
    return t;
}

double max_rel_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (int i = 0; i < a.numel(); ++i) {
        const double x = a.values()[static_cast<std::size_t>(i)];
        const double y = b.values()[static_cast<std::size_t>(i)];
        const double denom = std::max({std::abs(x), std::abs(y), 1e-12});
        worst = std::max(worst, std::abs(x - y) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("conv_out_extent: floor semantics and errors") {
    CHECK(k::conv_out_extent(32, 3, 1, 1) == 32);
    CHECK(k::conv_out_extent(32, 3, 2, 1) == 16);
    CHECK(k::conv_out_extent(12, 3, 1, 0) == 10);
    CHECK(k::conv_out_extent(8, 2, 2, 0) == 4);
    CHECK_THROWS_AS(k::conv_out_extent(2, 5, 1, 0), DimensionError);
}

TEST_CASE("conv2d_forward: 1x1 scalar product") {
    Tensor input({1, 1, 1}, {2.0});
    Tensor kernel({1, 1, 1, 1}, {3.0});
    Tensor out = k::conv2d_forward(input, kernel, 1, 0);
    CHECK(out.shape() == std::vector<int>{1, 1, 1});
    CHECK(out[0] == 6.0);
}

TEST_CASE("conv2d_forward: zero input gives zero output") {
    Rng rng(1);
    Tensor input = Tensor::zeros({3, 6, 6});
    Tensor kernel = random_tensor({4, 3, 3, 3}, rng);
    Tensor out = k::conv2d_forward(input, kernel, 1, 1);
    for (int i = 0; i < out.numel(); ++i) CHECK(out[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("conv2d_forward matches the naive reference") {
    Rng rng(123);
    struct Case {
        std::vector<int> in, kr;
        int stride, padding;
    };
    const std::vector<Case> cases = {
        {{3, 8, 8}, {4, 3, 3, 3}, 1, 1}, {{3, 8, 8}, {4, 3, 3, 3}, 2, 1}, {{1, 7, 5}, {2, 1, 3, 3}, 1, 0},
        {{2, 9, 9}, {5, 2, 5, 5}, 2, 2}, {{4, 6, 6}, {3, 4, 1, 1}, 1, 0},
    };
    for (const auto& c : cases) {
        Tensor input = random_tensor(c.in, rng);
        Tensor kernel = random_tensor(c.kr, rng);
        Tensor fast = k::conv2d_forward(input, kernel, c.stride, c.padding);
        Tensor slow = oracle::naive_conv2d(input, kernel, c.stride, c.padding);
        CHECK(max_rel_diff(fast, slow) <= 1e-12);
    }
}

TEST_CASE("conv2d_forward: shape mismatches name the axis") {
    Rng rng(2);
    Tensor input = random_tensor({3, 8, 8}, rng);
    Tensor kernel = random_tensor({4, 2, 3, 3}, rng);  // wrong in-channels
    CHECK_THROWS_AS(k::conv2d_forward(input, kernel, 1, 1), DimensionError);
    CHECK_THROWS_WITH_AS(k::conv2d_forward(input, kernel, 1, 1),
                         doctest::Contains("channel"), DimensionError);
}

TEST_CASE("conv2d_backward matches finite differences") {
    Rng rng(77);
    Tensor input = random_tensor({2, 5, 5}, rng);
    Tensor kernel = random_tensor({3, 2, 3, 3}, rng);
    Tensor upstream = random_tensor({3, 5, 5}, rng);

    auto [grad_input, grad_kernel] = k::conv2d_backward(input, kernel, upstream, 1, 1);

    auto loss_at = [&](const Tensor& in, const Tensor& kr) {
        Tensor out = k::conv2d_forward(in, kr, 1, 1);
        double acc = 0.0;
        for (int i = 0; i < out.numel(); ++i)
            acc += out.values()[static_cast<std::size_t>(i)] * upstream.values()[static_cast<std::size_t>(i)];
        return acc;
    };

    std::vector<double> kp(kernel.values());
    auto fd_kernel = oracle::finite_diff_grad(
        [&](const std::vector<double>& x) { return loss_at(input, Tensor(kernel.shape(), x)); }, kp, 1e-6);
    for (int i = 0; i < grad_kernel.numel(); ++i)
        CHECK(grad_kernel.values()[static_cast<std::size_t>(i)] ==
              doctest::Approx(fd_kernel[static_cast<std::size_t>(i)]).epsilon(1e-6));

    std::vector<double> ip(input.values());
    auto fd_input = oracle::finite_diff_grad(
        [&](const std::vector<double>& x) { return loss_at(Tensor(input.shape(), x), kernel); }, ip, 1e-6);
    for (int i = 0; i < grad_input.numel(); ++i)
        CHECK(grad_input.values()[static_cast<std::size_t>(i)] ==
              doctest::Approx(fd_input[static_cast<std::size_t>(i)]).epsilon(1e-6));
}

TEST_CASE("conv2d_backward with stride 2 matches finite differences") {
    Rng rng(78);
    Tensor input = random_tensor({1, 6, 6}, rng);
    Tensor kernel = random_tensor({2, 1, 3, 3}, rng);
    Tensor out = k::conv2d_forward(input, kernel, 2, 1);
    Tensor upstream = random_tensor(out.shape(), rng);
    auto [grad_input, grad_kernel] = k::conv2d_backward(input, kernel, upstream, 2, 1);

    auto loss_at = [&](const Tensor& kr) {
        Tensor o = k::conv2d_forward(input, kr, 2, 1);
        double acc = 0.0;
        for (int i = 0; i < o.numel(); ++i)
            acc += o.values()[static_cast<std::size_t>(i)] * upstream.values()[static_cast<std::size_t>(i)];
        return acc;
    };
    auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double>& x) { return loss_at(Tensor(kernel.shape(), x)); }, kernel.values(), 1e-6);
    for (int i = 0; i < grad_kernel.numel(); ++i)
        CHECK(grad_kernel.values()[static_cast<std::size_t>(i)] ==
              doctest::Approx(fd[static_cast<std::size_t>(i)]).epsilon(1e-6));
    CHECK(grad_input.shape() == input.shape());
}

TEST_CASE("dense kernels: forward math and backward finite differences") {
    Tensor x({3}, {1.0, 2.0, 3.0});
    Tensor w({2, 3}, {1, 0, 0, 0, 1, 1});
    Tensor y = k::dense_forward(x, w);
    CHECK(y.shape() == std::vector<int>{2});
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 5.0);

    Rng rng(9);
    Tensor xr = random_tensor({4}, rng);
    Tensor wr = random_tensor({3, 4}, rng);
    Tensor up = random_tensor({3}, rng);
    auto [gx, gw] = k::dense_backward(xr, wr, up);
    auto loss_w = [&](const std::vector<double>& v) {
        Tensor out = k::dense_forward(xr, Tensor(wr.shape(), v));
        double acc = 0.0;
        for (int i = 0; i < 3; ++i)
            acc += out.values()[static_cast<std::size_t>(i)] * up.values()[static_cast<std::size_t>(i)];
        return acc;
    };
    auto fd_w = oracle::finite_diff_grad(loss_w, wr.values(), 1e-6);
    for (int i = 0; i < gw.numel(); ++i)
        CHECK(gw.values()[static_cast<std::size_t>(i)] == doctest::Approx(fd_w[static_cast<std::size_t>(i)]).epsilon(1e-6));
    auto loss_x = [&](const std::vector<double>& v) {
        Tensor out = k::dense_forward(Tensor(xr.shape(), v), wr);
        double acc = 0.0;
        for (int i = 0; i < 3; ++i)
            acc += out.values()[static_cast<std::size_t>(i)] * up.values()[static_cast<std::size_t>(i)];
        return acc;
    };
    auto fd_x = oracle::finite_diff_grad(loss_x, xr.values(), 1e-6);
    for (int i = 0; i < gx.numel(); ++i)
        CHECK(gx.values()[static_cast<std::size_t>(i)] == doctest::Approx(fd_x[static_cast<std::size_t>(i)]).epsilon(1e-6));
}

TEST_CASE("relu: forward clamps, backward gates on the input sign") {
    Tensor x({3}, {-1.0, 0.0, 2.0});
    Tensor y = k::relu_forward(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
    Tensor up({3}, {5.0, 5.0, 5.0});
    Tensor gx = k::relu_backward(x, up);
    CHECK(gx[0] == 0.0);
    CHECK(gx[1] == 0.0);
    CHECK(gx[2] == 5.0);
}

TEST_CASE("avgpool: forward averages disjoint windows, backward spreads evenly") {
    Tensor x({1, 2, 2}, {1.0, 2.0, 3.0, 6.0});
    Tensor y = k::avgpool_forward(x, 2);
    CHECK(y.shape() == std::vector<int>{1, 1, 1});
    CHECK(y[0] == 3.0);
    Tensor up({1, 1, 1}, {8.0});
    Tensor gx = k::avgpool_backward(x, up, 2);
    for (int i = 0; i < 4; ++i) CHECK(gx[static_cast<std::size_t>(i)] == 2.0);
    CHECK_THROWS_AS(k::avgpool_forward(Tensor::zeros({1, 3, 3}), 2), DimensionError);
}

TEST_CASE("softmax cross entropy: uniform logits, gradient structure, errors") {
    Tensor logits({4}, {0.5, 0.5, 0.5, 0.5});
    auto [loss, grad] = k::softmax_cross_entropy(logits, 2);
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    double gsum = 0.0;
    for (int i = 0; i < 4; ++i) gsum += grad.values()[static_cast<std::size_t>(i)];
    CHECK(gsum == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(grad[2] < 0.0);

    CHECK_THROWS_AS(k::softmax_cross_entropy(logits, 4), InputError);
    CHECK_THROWS_AS(k::softmax_cross_entropy(logits, -1), InputError);

    // huge logits stay finite thanks to the max shift
    Tensor big({3}, {1000.0, 999.0, 998.0});
    auto [loss2, grad2] = k::softmax_cross_entropy(big, 0);
    CHECK(std::isfinite(loss2));
    for (int i = 0; i < 3; ++i) CHECK(std::isfinite(grad2.values()[static_cast<std::size_t>(i)]));
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
    Rng rng(21);
    Tensor logits = random_tensor({5}, rng);
    auto [loss, grad] = k::softmax_cross_entropy(logits, 3);
    (void)loss;
    auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double>& v) {
            auto [l, g] = k::softmax_cross_entropy(Tensor({5}, v), 3);
            (void)g;
            return l;
        },
        logits.values(), 1e-6);
    for (int i = 0; i < 5; ++i)
        CHECK(grad.values()[static_cast<std::size_t>(i)] == doctest::Approx(fd[static_cast<std::size_t>(i)]).epsilon(1e-6));
}

TEST_CASE("kernels are pure: repeated calls give identical bits") {
    Rng rng(31);
    Tensor input = random_tensor({2, 6, 6}, rng);
    Tensor kernel = random_tensor({3, 2, 3, 3}, rng);
    Tensor a = k::conv2d_forward(input, kernel, 1, 1);
    Tensor b = k::conv2d_forward(input, kernel, 1, 1);
    CHECK(a == b);
}
