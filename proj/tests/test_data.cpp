// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "softprune/data.hpp"
#include "softprune/errors.hpp"
#include "softprune/rng.hpp"

using namespace softprune;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "softprune_data_test") { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("synthetic blobs: sizes, labels, range, determinism") {
    auto [train, test] = synth_blobs(4, 10, 2, 5, 6, 0.2, 99);
    CHECK(train.count() == 40);
    CHECK(test.count() == 8);  // per_class/5 = 2 per class
    CHECK(train.images.shape() == std::vector<int>{40, 2, 5, 6});
    CHECK(train.classes == 4);
    CHECK(test.classes == 4);
    CHECK(train.split == "train");
    CHECK(test.split == "test");
    CHECK_NOTHROW(train.validate());
    CHECK_NOTHROW(test.validate());
    for (int i = 0; i < train.count(); ++i) CHECK(train.labels[static_cast<std::size_t>(i)] == i / 10);
    for (double v : train.images.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    auto [train2, test2] = synth_blobs(4, 10, 2, 5, 6, 0.2, 99);
    CHECK(train.images == train2.images);
    CHECK(test.images == test2.images);
    auto [train3, test3] = synth_blobs(4, 10, 2, 5, 6, 0.2, 100);
    (void)test3;
    CHECK_FALSE(train.images == train3.images);

    // the test split is drawn separately, not copied from training samples
    bool any_equal = false;
    for (int i = 0; i < test.count() && !any_equal; ++i)
        for (int j = 0; j < train.count() && !any_equal; ++j)
            if (test.image(i) == train.image(j)) any_equal = true;
    CHECK_FALSE(any_equal);
}

TEST_CASE("synthetic blobs: zero noise collapses every sample onto its class template") {
    auto [train, test] = synth_blobs(3, 7, 1, 4, 4, 0.0, 5);
    CHECK(test.count() == 3);  // max(1, 7/5)
    for (int k = 0; k < 3; ++k) {
        const Tensor proto = train.image(k * 7);
        for (int s = 1; s < 7; ++s) CHECK(train.image(k * 7 + s) == proto);
        CHECK(test.image(k) == proto);
    }
    CHECK_FALSE(train.image(0) == train.image(7));  // distinct class templates
}

TEST_CASE("synthetic blobs: tiny per_class still yields one test sample per class") {
    auto [train, test] = synth_blobs(2, 1, 1, 3, 3, 0.1, 0);
    CHECK(train.count() == 2);
    CHECK(test.count() == 2);
}

TEST_CASE("synthetic blobs input validation") {
    CHECK_THROWS_AS(synth_blobs(1, 10, 1, 4, 4, 0.1, 0), InputError);
    CHECK_THROWS_AS(synth_blobs(2, 0, 1, 4, 4, 0.1, 0), InputError);
    CHECK_THROWS_AS(synth_blobs(2, 10, 0, 4, 4, 0.1, 0), InputError);
    CHECK_THROWS_AS(synth_blobs(2, 10, 1, 4, 4, -0.1, 0), InputError);
}

TEST_CASE("idx files round-trip byte-quantized data exactly") {
    TempDir dir;
    // values on the k/255 grid survive the byte encoding bit for bit
    Dataset ds;
    ds.images = Tensor::zeros({6, 1, 3, 4});
    Rng rng(3);
    for (double& v : ds.images.values()) v = static_cast<double>(rng.uniform_index(256)) / 255.0;
    ds.labels = {0, 1, 2, 1, 0, 2};
    ds.classes = 3;
    ds.split = "train";

    const std::string ip = dir.file("img.idx"), lp = dir.file("lab.idx");
    save_idx(ds, ip, lp);
    Dataset back = load_idx(ip, lp);
    CHECK(back.images == ds.images);
    CHECK(back.labels == ds.labels);
    CHECK(back.classes == 3);
    CHECK(back.images.shape() == std::vector<int>{6, 1, 3, 4});
}

TEST_CASE("idx loader rejects damage") {
    TempDir dir;
    auto [train, test] = synth_blobs(2, 3, 1, 4, 4, 0.1, 1);
    (void)test;
    const std::string ip = dir.file("img.idx"), lp = dir.file("lab.idx");
    save_idx(train, ip, lp);

    auto copy_prefix = [&](const std::string& src, std::size_t n, const std::string& name) {
        std::ifstream in(src, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(dir.file(name), std::ios::binary);
        out << data.substr(0, n);
        return dir.file(name);
    };

    CHECK_THROWS_AS(load_idx(dir.file("missing.idx"), lp), InputError);
    CHECK_THROWS_AS(load_idx(ip, dir.file("missing.idx")), InputError);
    CHECK_THROWS_WITH_AS(load_idx(copy_prefix(ip, 40, "short.idx"), lp), doctest::Contains("truncated"),
                         ParseError);
    CHECK_THROWS_WITH_AS(load_idx(copy_prefix(ip, 2, "tiny.idx"), lp), doctest::Contains("truncated"),
                         ParseError);
    CHECK_THROWS_WITH_AS(load_idx(lp, lp), doctest::Contains("magic"), ParseError);  // label magic as images

    // label count disagreeing with image count
    Dataset shrunk = train;
    shrunk.images = Tensor::zeros({2, 1, 4, 4});
    shrunk.labels = {0, 1};
    save_idx(shrunk, dir.file("img2.idx"), dir.file("lab2.idx"));
    CHECK_THROWS_AS(load_idx(ip, dir.file("lab2.idx")), ParseError);
}

TEST_CASE("idx export refuses multi-channel images") {
    TempDir dir;
    auto [train, test] = synth_blobs(2, 2, 3, 4, 4, 0.1, 2);
    (void)test;
    CHECK_THROWS_AS(save_idx(train, dir.file("a"), dir.file("b")), UnsupportedError);
}

TEST_CASE("csv loader: square and flat layouts, scaling, class inference") {
    TempDir dir;
    const std::string p = dir.file("d.csv");
    {
        std::ofstream f(p);
        f << "1,0,128,255,64\n";
        f << "0,255,255,255,255\n";
        f << "\n";  // blank lines are skipped
        f << "3,0,0,0,0\n";
    }
    Dataset ds = load_csv(p);
    CHECK(ds.images.shape() == std::vector<int>{3, 1, 2, 2});  // 4 pixels -> 2x2
    CHECK(ds.labels == std::vector<int>{1, 0, 3});
    CHECK(ds.classes == 4);
    CHECK(ds.images[0] == 0.0);
    CHECK(ds.images[1] == 128.0 / 255.0);
    CHECK(ds.images[2] == 1.0);

    {
        std::ofstream f(p);
        f << "0,10,20,30\n1,1,2,3\n";
    }
    ds = load_csv(p);
    CHECK(ds.images.shape() == std::vector<int>{2, 1, 1, 3});  // 3 pixels -> flat row
}

TEST_CASE("csv loader rejects malformed rows with line numbers") {
    TempDir dir;
    const std::string p = dir.file("bad.csv");
    auto write_file = [&](const std::string& text) {
        std::ofstream f(p);
        f << text;
    };
    write_file("1,2,x\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("line 1"), ParseError);
    write_file("1,2,3\n0,1\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("line 2"), ParseError);
    write_file("1.5,2,3\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("whole number"), ParseError);
    write_file("1,300,3\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("outside"), ParseError);
    write_file("5\n");
    CHECK_THROWS_AS(load_csv(p), ParseError);
    write_file("");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("no data rows"), ParseError);
    CHECK_THROWS_AS(load_csv(dir.file("missing.csv")), InputError);
}

TEST_CASE("standardize: training statistics map both splits to zero mean, unit spread") {
    auto [train, test] = synth_blobs(3, 20, 2, 6, 6, 0.25, 11);
    standardize(train, test);

    const int c = 2, plane = 36;
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < train.count(); ++i)
            for (int p = 0; p < plane; ++p) {
                const double v =
                    train.images.values()[(static_cast<std::size_t>(i) * c + ch) * plane + p];
                sum += v;
                sq += v * v;
            }
        const double total = static_cast<double>(train.count()) * plane;
        CHECK(sum / total == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(sq / total == doctest::Approx(1.0).epsilon(1e-9));
    }
    // the test split uses the training stats, so its mean is near but not at 0
    double tsum = 0.0;
    for (double v : test.images.values()) tsum += v;
    CHECK(std::abs(tsum / test.images.numel()) < 0.5);
}

TEST_CASE("standardize tolerates a constant channel") {
    Dataset train, test;
    train.images = Tensor::zeros({3, 1, 2, 2});
    train.labels = {0, 1, 0};
    train.classes = 2;
    train.split = "train";
    test = train;
    test.split = "test";
    CHECK_NOTHROW(standardize(train, test));  // stddev 0 guards to 1
    for (double v : train.images.values()) CHECK(v == 0.0);
}

TEST_CASE("hflip mirrors columns and is an involution") {
    Tensor img({1, 2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor flipped = hflip(img);
    CHECK(flipped.values() == std::vector<double>{3, 2, 1, 6, 5, 4});
    CHECK(hflip(flipped) == img);
    CHECK_THROWS_AS(hflip(Tensor::zeros({2, 2})), DimensionError);
}
