// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "softprune/errors.hpp"
#include "softprune/graph.hpp"
#include "softprune/models.hpp"
#include "softprune/prune.hpp"
#include "softprune/rng.hpp"
#include "test_util.hpp"

using namespace softprune;

namespace {

// per-filter norms computed directly from the weights, independent of
// rank_filters, for feeding the exhaustive oracle
std::vector<double> layer_norms(const ModelGraph& m, const std::string& layer, NormKind norm) {
    const Tensor& w = m.weight(layer);
    const int n = w.dim(0);
    const int slice = w.numel() / n;
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < slice; ++i) {
            const double v = w.values()[static_cast<std::size_t>(j * slice + i)];
            acc += norm == NormKind::l2 ? v * v : std::abs(v);
        }
        out[static_cast<std::size_t>(j)] = norm == NormKind::l2 ? std::sqrt(acc) : acc;
    }
    return out;
}

std::vector<int> pruned_indices(const FilterMask& mask, const std::string& layer) {
    std::vector<int> out;
    const auto& kept = mask.kept.at(layer);
    for (std::size_t i = 0; i < kept.size(); ++i)
        if (!kept[i]) out.push_back(static_cast<int>(i));
    return out;
}

}  // namespace

TEST_CASE("selection minimizes the summed norm: matches exhaustive search") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        ModelGraph m = make_toy_cnn(1, 4, 8, 8, 6, 8);
        init_params(m, seed);
        for (NormKind norm : {NormKind::l2, NormKind::l1}) {
            for (double rate : {0.2, 0.5}) {
                PruneConfig cfg;
                cfg.target_rate = rate;
                cfg.norm = norm;
                FilterMask mask = select_mask(m, cfg);
                for (const std::string layer : {"conv1", "conv2"}) {
                    const int n = layer == "conv1" ? 6 : 8;
                    const int k = static_cast<int>(std::floor(n * rate));
                    CHECK(mask.pruned_count(layer) == k);
                    CHECK(pruned_indices(mask, layer) ==
                          oracle::exhaustive_select(layer_norms(m, layer, norm), k));
                }
            }
        }
    }
}

TEST_CASE("selection ties resolve to the lowest filter indices") {
    ModelGraph m = make_toy_cnn(1, 4, 8, 8, 4, 6);
    init_params(m, 0);
    // force filters 1 and 3 of conv1 to share the exact norm of filter 0
    Tensor& w = m.mutable_weight("conv1");
    const int slice = w.numel() / 4;
    for (int i = 0; i < slice; ++i) {
        w[static_cast<std::size_t>(1 * slice + i)] = w[static_cast<std::size_t>(i)];
        w[static_cast<std::size_t>(3 * slice + i)] = w[static_cast<std::size_t>(i)];
    }
    // make filter 2 clearly the largest so the three tied ones are smallest
    for (int i = 0; i < slice; ++i) w[static_cast<std::size_t>(2 * slice + i)] = 10.0;

    PruneConfig cfg;
    cfg.target_rate = 0.5;  // floor(4*0.5) = 2 of the three tied filters
    cfg.scope = {"conv1"};
    FilterMask mask = select_mask(m, cfg);
    CHECK(pruned_indices(mask, "conv1") == std::vector<int>{0, 1});
    CHECK(pruned_indices(mask, "conv1") == oracle::exhaustive_select(layer_norms(m, "conv1", NormKind::l2), 2));
}

TEST_CASE("weight-granularity selection prunes exactly floor(count * rate) per layer") {
    ModelGraph m = make_toy_cnn(1, 4, 8, 8, 4, 6);
    init_params(m, 1);
    for (double rate : {0.3, 0.7}) {
        PruneConfig cfg;
        cfg.target_rate = rate;
        cfg.granularity = Granularity::weight;
        FilterMask mask = select_mask(m, cfg);
        for (const std::string layer : {"conv1", "conv2"}) {
            const int total = m.weight(layer).numel();
            CHECK(mask.pruned_count(layer) == static_cast<int>(std::floor(total * rate)));
            // the pruned entries are the smallest magnitudes
            const auto& kept = mask.kept.at(layer);
            double largest_pruned = 0.0, smallest_kept = 1e300;
            for (int i = 0; i < total; ++i) {
                double mag = std::abs(m.weight(layer).values()[static_cast<std::size_t>(i)]);
                if (kept[static_cast<std::size_t>(i)])
                    smallest_kept = std::min(smallest_kept, mag);
                else
                    largest_pruned = std::max(largest_pruned, mag);
            }
            CHECK(largest_pruned <= smallest_kept);
        }
    }
}

TEST_CASE("apply_mask: alpha 1 is a bitwise no-op, alpha 0 writes literal zeros") {
    ModelGraph m = make_toy_cnn(1, 4, 8, 8, 4, 6);
    init_params(m, 2);
    PruneConfig cfg;
    cfg.target_rate = 0.5;
    FilterMask mask = select_mask(m, cfg);

    ModelGraph untouched = m;
    apply_mask(m, mask, 1.0);
    CHECK(m.weight("conv1") == untouched.weight("conv1"));
    CHECK(m.weight("conv2") == untouched.weight("conv2"));

    apply_mask(m, mask, 0.5);
    const int slice1 = m.weight("conv1").numel() / 4;
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < slice1; ++i) {
            const std::size_t at = static_cast<std::size_t>(j * slice1 + i);
            const double want = mask.kept.at("conv1")[static_cast<std::size_t>(j)]
                                    ? untouched.weight("conv1").values()[at]
                                    : untouched.weight("conv1").values()[at] * 0.5;
            CHECK(m.weight("conv1").values()[at] == want);
        }

    apply_mask(m, mask, 0.0);
    for (int j = 0; j < 4; ++j) {
        if (mask.kept.at("conv1")[static_cast<std::size_t>(j)]) continue;
        for (int i = 0; i < slice1; ++i) {
            const double v = m.weight("conv1").values()[static_cast<std::size_t>(j * slice1 + i)];
            CHECK(std::bit_cast<std::uint64_t>(v) == 0u);  // +0.0, not -0.0
        }
    }
    CHECK_THROWS_AS(apply_mask(m, mask, -0.1), InputError);
    CHECK_THROWS_AS(apply_mask(m, mask, 1.5), InputError);

    FilterMask wrong = mask;
    wrong.kept["conv1"].pop_back();
    CHECK_THROWS_AS(apply_mask(m, wrong, 0.5), DimensionError);
}

TEST_CASE("apply_mask covers conv biases at filter granularity") {
    ModelGraph m;
    m.input_shape = {1, 4, 4};
    LayerSpec c;
    c.kind = LayerKind::conv;
    c.name = "c";
    c.in_channels = 1;
    c.out_channels = 2;
    c.kernel_size = 1;
    c.has_bias = true;
    m.layers.push_back(c);
    m.add_param("c", Tensor({2, 1, 1, 1}, {3.0, 4.0}), Tensor({2}, {1.0, 2.0}));

    FilterMask mask;
    mask.kept["c"] = {char(0), char(1)};
    apply_mask(m, mask, 0.0);
    CHECK(m.weight("c")[0] == 0.0);
    CHECK(m.weight("c")[1] == 4.0);
    CHECK((*m.bias("c"))[0] == 0.0);
    CHECK((*m.bias("c"))[1] == 2.0);
}

TEST_CASE("shrink-step formulation reproduces plain scaling to the last bit") {
    Rng rng(7);
    Tensor w({64});
    for (int i = 0; i < 64; ++i) w[static_cast<std::size_t>(i)] = (rng.uniform() - 0.5) * 4.0;

    for (double alpha0 : {1.0, 0.37, 1.75, 123.456}) {
        std::vector<double> alphas = {0.0, alpha0, alpha0 / 2, alpha0 * 1e-9, 1e-300,
                                      std::nextafter(alpha0, 0.0)};
        for (int i = 0; i < 32; ++i) alphas.push_back(rng.uniform() * alpha0);
        for (double alpha : alphas) {
            Tensor got = decay_step_as_regularization(w, alpha, alpha0);
            for (int i = 0; i < w.numel(); ++i) {
                const double want = alpha * w.values()[static_cast<std::size_t>(i)];
                CHECK(std::bit_cast<std::uint64_t>(got.values()[static_cast<std::size_t>(i)]) ==
                      std::bit_cast<std::uint64_t>(want));
            }
        }
    }
    CHECK_THROWS_AS(decay_step_as_regularization(w, 0.5, 0.4), InputError);
    CHECK_THROWS_AS(decay_step_as_regularization(w, -0.1, 1.0), InputError);
    CHECK_THROWS_AS(decay_step_as_regularization(w, 0.5, 0.0), InputError);
}

TEST_CASE("compacting a zeroed model leaves the forward pass bit-identical") {
    SUBCASE("plain cnn") {
        ModelGraph m = make_toy_cnn(2, 5);
        init_params(m, 11);
        PruneConfig cfg;
        cfg.target_rate = 0.4;
        FilterMask mask = select_mask(m, cfg);
        apply_mask(m, mask, 0.0);
        ModelGraph small = compact(m, mask);
        CHECK(small.weight("conv1").dim(0) == 5);  // 8 - floor(8*0.4)
        CHECK(small.weight("conv2").dim(0) == 10);
        CHECK(small.weight("conv2").dim(1) == 5);
        CHECK(small.weight("fc").dim(1) == 10 * 9);

        Rng rng(12);
        for (int trial = 0; trial < 4; ++trial) {
            Tensor x = testutil::random_image({2, 12, 12}, rng);
            auto [a, ca] = forward(m, x);
            auto [b, cb] = forward(small, x);
            (void)ca;
            (void)cb;
            CHECK(a == b);
        }
    }
    SUBCASE("residual net with shortcut channel maps") {
        ModelGraph m = make_resnet_cifar(20);
        init_params(m, 11);
        PruneConfig cfg;
        cfg.target_rate = 0.25;
        FilterMask mask = select_mask(m, cfg);
        apply_mask(m, mask, 0.0);
        ModelGraph small = compact(m, mask);

        // stem loses 4 of 16 filters; the first block's link records both maps
        CHECK(small.weight("stem").dim(0) == 12);
        const ResidualLink* link = small.link_at("s1b1add");
        REQUIRE(link != nullptr);
        CHECK(link->source_full_width == 16);
        CHECK(link->main_channel_map.size() == 12);
        CHECK(link->source_channel_map.size() == 12);

        Rng rng(13);
        for (int trial = 0; trial < 2; ++trial) {
            Tensor x = testutil::random_image({3, 32, 32}, rng);
            auto [a, ca] = forward(m, x);
            auto [b, cb] = forward(small, x);
            (void)ca;
            (void)cb;
            CHECK(a == b);
        }
    }
}

TEST_CASE("compact refuses unsound inputs") {
    ModelGraph m = make_toy_cnn(1, 4, 8, 8, 4, 6);
    init_params(m, 3);
    PruneConfig cfg;
    cfg.target_rate = 0.5;
    FilterMask mask = select_mask(m, cfg);

    SUBCASE("pruned weights still nonzero") {
        CHECK_THROWS_WITH_AS(compact(m, mask), doctest::Contains("nonzero"), StateError);
    }
    SUBCASE("weight granularity has no compact form") {
        PruneConfig wcfg;
        wcfg.target_rate = 0.5;
        wcfg.granularity = Granularity::weight;
        FilterMask wmask = select_mask(m, wcfg);
        apply_mask(m, wmask, 0.0);
        CHECK_THROWS_AS(compact(m, wmask), UnsupportedError);
    }
    SUBCASE("a layer with every filter pruned cannot be removed") {
        FilterMask all;
        all.kept["conv1"] = std::vector<char>(4, char(0));
        apply_mask(m, all, 0.0);
        CHECK_THROWS_WITH_AS(compact(m, all), doctest::Contains("every filter"), StateError);
    }
}

TEST_CASE("mask files round-trip and reject malformed input") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "softprune_mask_test";
    fs::create_directories(dir);
    const std::string path = (dir / "mask.txt").string();

    ModelGraph m = make_toy_cnn(1, 4, 8, 8, 4, 6);
    init_params(m, 4);
    PruneConfig cfg;
    cfg.target_rate = 0.5;
    FilterMask mask = select_mask(m, cfg);
    save_mask(mask, path);
    FilterMask back = load_mask(path, m);
    CHECK(back.kept == mask.kept);

    // a layer with nothing pruned still appears and loads as all-kept
    PruneConfig zero;
    zero.target_rate = 0.0;
    save_mask(select_mask(m, zero), path);
    back = load_mask(path, m);
    CHECK(back.pruned_count("conv1") == 0);
    CHECK(back.pruned_count("conv2") == 0);

    auto write_file = [&](const std::string& text) {
        std::ofstream f(path);
        f << text;
    };
    write_file("conv1 0 1\n");
    CHECK_THROWS_WITH_AS(load_mask(path, m), doctest::Contains("missing ':'"), ParseError);
    write_file("conv1: 0\nconv1: 1\n");
    CHECK_THROWS_WITH_AS(load_mask(path, m), doctest::Contains("duplicate"), ParseError);
    write_file("conv1: 9\n");
    CHECK_THROWS_WITH_AS(load_mask(path, m), doctest::Contains("outside"), ParseError);
    write_file("conv1: 1 x 2\n");
    CHECK_THROWS_WITH_AS(load_mask(path, m), doctest::Contains("malformed"), ParseError);
    write_file("mystery: 0\n");
    CHECK_THROWS_AS(load_mask(path, m), InputError);
    write_file("fc: 0\n");
    CHECK_THROWS_AS(load_mask(path, m), InputError);  // not a conv layer
    CHECK_THROWS_AS(load_mask((dir / "nope.txt").string(), m), InputError);

    fs::remove_all(dir);
}

TEST_CASE("prune configuration validation") {
    ModelGraph m = make_toy_cnn(1, 4, 8, 8, 4, 6);
    init_params(m, 0);
    PruneConfig cfg;
    cfg.target_rate = 1.0;
    CHECK_THROWS_AS(cfg.validate(m), ConfigError);
    cfg.target_rate = -0.2;
    CHECK_THROWS_AS(cfg.validate(m), ConfigError);
    cfg.target_rate = 0.5;
    cfg.scope = {"fc"};
    CHECK_THROWS_AS(cfg.validate(m), InputError);
    cfg.scope = {"conv1"};
    CHECK_NOTHROW(cfg.validate(m));

    FilterMask mask = select_mask(m, cfg);
    CHECK(mask.covers("conv1"));
    CHECK_FALSE(mask.covers("conv2"));
    CHECK_THROWS_AS(mask.pruned_count("conv2"), InputError);
}
