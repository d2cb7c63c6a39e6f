// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "softprune/errors.hpp"
#include "softprune/rng.hpp"

namespace softprune {

int Dataset::count() const { return images.rank() == 4 ? images.dim(0) : 0; }

Tensor Dataset::image(int i) const {
    if (i < 0 || i >= count()) throw InputError("sample index " + std::to_string(i) + " out of range");
    const int c = images.dim(1), h = images.dim(2), w = images.dim(3);
    const int n = c * h * w;
    std::vector<double> v(images.values().begin() + static_cast<std::ptrdiff_t>(i) * n,
                          images.values().begin() + static_cast<std::ptrdiff_t>(i + 1) * n);
    return Tensor({c, h, w}, std::move(v));
}

void Dataset::validate() const {
    if (images.rank() != 4)
        throw InputError("dataset images must be [count, channels, h, w], got " + images.shape_string());
    if (static_cast<int>(labels.size()) != count())
        throw InputError("dataset has " + std::to_string(count()) + " images but " +
                         std::to_string(labels.size()) + " labels");
    if (classes < 2) throw InputError("dataset must declare at least 2 classes");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= classes)
            throw InputError("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                             " outside [0, " + std::to_string(classes) + ")");
    if (split != "train" && split != "test")
        throw InputError("dataset split must be 'train' or 'test', got '" + split + "'");
}

std::pair<Dataset, Dataset> synth_blobs(int classes, int per_class, int channels, int height, int width,
                                           double noise_sigma, std::uint64_t seed) {
    if (classes < 2) throw InputError("classes must be >= 2");
    if (per_class < 1) throw InputError("per_class must be >= 1");
    if (channels < 1 || height < 1 || width < 1) throw InputError("image dims must be positive");
    if (!(noise_sigma >= 0.0)) throw InputError("noise_sigma must be >= 0");

    Rng rng(seed);
    const int n = channels * height * width;
    std::vector<std::vector<double>> templates(static_cast<std::size_t>(classes));
    for (auto& t : templates) {
        t.resize(static_cast<std::size_t>(n));
        for (double& v : t) v = rng.uniform();
    }

    auto draw = [&](Dataset& ds, int count_per_class, const char* split) {
        const int total = classes * count_per_class;
        ds.images = Tensor::zeros({total, channels, height, width});
        ds.labels.resize(static_cast<std::size_t>(total));
        ds.classes = classes;
        ds.split = split;
        double* d = ds.images.data();
        for (int k = 0; k < classes; ++k) {
            const auto& t = templates[static_cast<std::size_t>(k)];
            for (int s = 0; s < count_per_class; ++s) {
                const int idx = k * count_per_class + s;
                ds.labels[static_cast<std::size_t>(idx)] = k;
                double* img = d + static_cast<std::ptrdiff_t>(idx) * n;
                for (int i = 0; i < n; ++i)
                    img[i] = std::clamp(t[static_cast<std::size_t>(i)] + noise_sigma * rng.normal(), 0.0, 1.0);
            }
        }
    };

    Dataset train, test;
    draw(train, per_class, "train");
    draw(test, std::max(1, per_class / 5), "test");
    return {train, test};
}

namespace {

std::uint32_t read_be32(std::istream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw ParseError("'" + path + "': truncated header");
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ostream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw InputError("cannot open image file '" + images_path + "'");
    if (read_be32(fi, images_path) != 0x00000803u)
        throw ParseError("'" + images_path + "': bad image-file magic");
    const int count = static_cast<int>(read_be32(fi, images_path));
    const int rows = static_cast<int>(read_be32(fi, images_path));
    const int cols = static_cast<int>(read_be32(fi, images_path));
    if (count < 1 || rows < 1 || cols < 1) throw ParseError("'" + images_path + "': bad dimensions");
    std::vector<unsigned char> bytes(static_cast<std::size_t>(count) * rows * cols);
    fi.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!fi) throw ParseError("'" + images_path + "': truncated pixel data");

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw InputError("cannot open label file '" + labels_path + "'");
    if (read_be32(fl, labels_path) != 0x00000801u)
        throw ParseError("'" + labels_path + "': bad label-file magic");
    const int lcount = static_cast<int>(read_be32(fl, labels_path));
    if (lcount != count)
        throw ParseError("label file '" + labels_path + "' has " + std::to_string(lcount) + " entries, images have " +
                         std::to_string(count));
    std::vector<unsigned char> lab(static_cast<std::size_t>(count));
    fl.read(reinterpret_cast<char*>(lab.data()), count);
    if (!fl) throw ParseError("'" + labels_path + "': truncated label data");

    Dataset ds;
    ds.images = Tensor::zeros({count, 1, rows, cols});
    double* d = ds.images.data();
    for (std::size_t i = 0; i < bytes.size(); ++i) d[i] = static_cast<double>(bytes[i]) / 255.0;
    ds.labels.assign(lab.begin(), lab.end());
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.classes = std::max(2, max_label + 1);
    ds.split = "train";
    ds.validate();
    return ds;
}

void save_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path) {
    data.validate();
    if (data.images.dim(1) != 1)
        throw UnsupportedError("idx export holds single-channel images; dataset has " +
                               std::to_string(data.images.dim(1)) + " channels");
    std::ofstream fi(images_path, std::ios::binary);
    if (!fi) throw InputError("cannot open '" + images_path + "' for writing");
    write_be32(fi, 0x00000803u);
    write_be32(fi, static_cast<std::uint32_t>(data.count()));
    write_be32(fi, static_cast<std::uint32_t>(data.images.dim(2)));
    write_be32(fi, static_cast<std::uint32_t>(data.images.dim(3)));
    for (double v : data.images.values()) {
        const long long p = std::llround(std::clamp(v, 0.0, 1.0) * 255.0);
        const unsigned char b = static_cast<unsigned char>(p);
        fi.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!fi) throw InputError("write to '" + images_path + "' failed");

    std::ofstream fl(labels_path, std::ios::binary);
    if (!fl) throw InputError("cannot open '" + labels_path + "' for writing");
    write_be32(fl, 0x00000801u);
    write_be32(fl, static_cast<std::uint32_t>(data.count()));
    for (int l : data.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        fl.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!fl) throw InputError("write to '" + labels_path + "' failed");
}

Dataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open csv file '" + path + "'");
    std::vector<double> pixels;
    std::vector<int> labels;
    int per_row = -1;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(row, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                vals.push_back(v);
            } catch (const std::exception&) {
                throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": bad value '" + cell + "'");
            }
        }
        if (vals.size() < 2)
            throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": need a label and pixels");
        const double lab = vals[0];
        if (lab < 0 || lab != std::floor(lab))
            throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": label must be a whole number");
        const int n = static_cast<int>(vals.size()) - 1;
        if (per_row < 0)
            per_row = n;
        else if (n != per_row)
            throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": row has " + std::to_string(n) +
                             " pixels, expected " + std::to_string(per_row));
        labels.push_back(static_cast<int>(lab));
        for (int i = 0; i < n; ++i) {
            const double p = vals[static_cast<std::size_t>(i + 1)];
            if (p < 0.0 || p > 255.0)
                throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": pixel " + std::to_string(p) +
                                 " outside [0, 255]");
            pixels.push_back(p / 255.0);
        }
    }
    if (labels.empty()) throw ParseError("'" + path + "': no data rows");

    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(per_row))));
    int h, w;
    if (side * side == per_row) {
        h = side;
        w = side;
    } else {
        h = 1;
        w = per_row;
    }
    Dataset ds;
    ds.images = Tensor({static_cast<int>(labels.size()), 1, h, w}, std::move(pixels));
    ds.labels = std::move(labels);
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.classes = std::max(2, max_label + 1);
    ds.split = "train";
    ds.validate();
    return ds;
}

void standardize(Dataset& train, Dataset& test) {
    train.validate();
    test.validate();
    if (train.images.dim(1) != test.images.dim(1))
        throw InputError("train and test splits disagree on channel count");
    const int c = train.images.dim(1);
    const int plane = train.images.dim(2) * train.images.dim(3);
    const int n = train.count();
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* img = train.images.values().data() +
                                (static_cast<std::ptrdiff_t>(i) * c + ch) * plane;
            for (int p = 0; p < plane; ++p) {
                sum += img[p];
                sq += img[p] * img[p];
            }
        }
        const double total = static_cast<double>(n) * plane;
        const double mean = sum / total;
        const double var = std::max(0.0, sq / total - mean * mean);
        const double stddev = std::sqrt(var) > 0.0 ? std::sqrt(var) : 1.0;
        auto apply = [&](Dataset& ds) {
            const int tp = ds.images.dim(2) * ds.images.dim(3);
            for (int i = 0; i < ds.count(); ++i) {
                double* img = ds.images.data() + (static_cast<std::ptrdiff_t>(i) * c + ch) * tp;
                for (int p = 0; p < tp; ++p) img[p] = (img[p] - mean) / stddev;
            }
        };
        apply(train);
        apply(test);
    }
}

Tensor hflip(const Tensor& image) {
    if (image.rank() != 3) throw DimensionError("hflip expects [c, h, w], got " + image.shape_string());
    Tensor out(image.shape());
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at3(ch, y, x) = image.at3(ch, y, w - 1 - x);
    return out;
}

}  // namespace softprune
