// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "softprune/errors.hpp"

namespace softprune {

namespace {

constexpr const char* kMagic = "softprune checkpoint 1";

LayerKind parse_kind(const std::string& token, const std::string& path) {
    for (LayerKind k : {LayerKind::conv, LayerKind::dense, LayerKind::relu, LayerKind::avgpool,
                        LayerKind::identity, LayerKind::residual_add, LayerKind::flatten})
        if (layer_kind_name(k) == token) return k;
    throw ParseError("'" + path + "': unknown layer kind '" + token + "'");
}

void write_doubles(std::ostream& f, const std::vector<double>& values) {
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        f.write(reinterpret_cast<const char*>(b), 8);
    }
}

std::vector<double> read_doubles(std::istream& f, std::size_t n, const std::string& path) {
    std::vector<double> out(n);
    std::vector<unsigned char> raw(n * 8);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw ParseError("'" + path + "': truncated parameter blob");
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(raw[i * 8 + k]) << (8 * k);
        double v;
        std::memcpy(&v, &bits, 8);
        out[i] = v;
    }
    return out;
}

void check_name(const std::string& name) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw InputError("layer name '" + name + "' cannot be serialized (empty or contains whitespace)");
}

}  // namespace

void save_checkpoint(const ModelGraph& model, const std::string& path) {
    model.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "' for writing");

    f << kMagic << "\n";
    f << "input " << model.input_shape[0] << " " << model.input_shape[1] << " " << model.input_shape[2] << "\n";
    f << "layers " << model.layers.size() << "\n";
    for (const auto& layer : model.layers) {
        check_name(layer.name);
        f << "layer " << layer_kind_name(layer.kind) << " " << layer.name << " " << layer.in_channels << " "
          << layer.out_channels << " " << layer.kernel_size << " " << layer.stride << " " << layer.padding << " "
          << layer.in_features << " " << layer.out_features << " " << layer.window << " "
          << (layer.has_bias ? 1 : 0) << "\n";
    }
    f << "links " << model.residual_links.size() << "\n";
    for (const auto& link : model.residual_links) {
        f << "link " << link.from << " " << link.at << " " << link.source_full_width << " main "
          << link.main_channel_map.size();
        for (int i : link.main_channel_map) f << " " << i;
        f << " source " << link.source_channel_map.size();
        for (int i : link.source_channel_map) f << " " << i;
        f << "\n";
    }
    f << "params " << model.params().size() << "\n";
    for (const auto& [name, p] : model.params()) {
        check_name(name);
        f << "param " << name << " weight " << p.weight.rank();
        for (int d = 0; d < p.weight.rank(); ++d) f << " " << p.weight.dim(d);
        if (p.bias)
            f << " bias " << p.bias->dim(0) << "\n";
        else
            f << " bias none\n";
    }
    f << "blob\n";
    for (const auto& [name, p] : model.params()) {
        write_doubles(f, p.weight.values());
        if (p.bias) write_doubles(f, p.bias->values());
    }
    if (!f) throw InputError("write to '" + path + "' failed");
}

ModelGraph load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open checkpoint '" + path + "'");

    auto next_line = [&](const char* what) {
        std::string line;
        if (!std::getline(f, line)) throw ParseError("'" + path + "': missing " + std::string(what));
        return line;
    };
    auto fail = [&](const std::string& line) -> ParseError {
        return ParseError("'" + path + "': malformed line '" + line + "'");
    };

    if (next_line("magic") != kMagic) throw ParseError("'" + path + "': not a checkpoint file");

    ModelGraph model;
    {
        std::istringstream s(next_line("input line"));
        std::string tag;
        int c, h, w;
        if (!(s >> tag >> c >> h >> w) || tag != "input") throw fail("input");
        model.input_shape = {c, h, w};
    }

    std::size_t layer_count;
    {
        std::istringstream s(next_line("layer count"));
        std::string tag;
        if (!(s >> tag >> layer_count) || tag != "layers") throw fail("layers");
    }
    for (std::size_t i = 0; i < layer_count; ++i) {
        std::string line = next_line("layer spec");
        std::istringstream s(line);
        std::string tag, kind_tok;
        LayerSpec spec;
        int has_bias;
        if (!(s >> tag >> kind_tok >> spec.name >> spec.in_channels >> spec.out_channels >> spec.kernel_size >>
              spec.stride >> spec.padding >> spec.in_features >> spec.out_features >> spec.window >> has_bias) ||
            tag != "layer")
            throw fail(line);
        spec.kind = parse_kind(kind_tok, path);
        spec.has_bias = has_bias != 0;
        model.layers.push_back(std::move(spec));
    }

    std::size_t link_count;
    {
        std::istringstream s(next_line("link count"));
        std::string tag;
        if (!(s >> tag >> link_count) || tag != "links") throw fail("links");
    }
    for (std::size_t i = 0; i < link_count; ++i) {
        std::string line = next_line("link spec");
        std::istringstream s(line);
        std::string tag, main_tag, source_tag;
        ResidualLink link;
        std::size_t main_n, source_n;
        if (!(s >> tag >> link.from >> link.at >> link.source_full_width >> main_tag >> main_n) || tag != "link" ||
            main_tag != "main")
            throw fail(line);
        link.main_channel_map.resize(main_n);
        for (auto& v : link.main_channel_map)
            if (!(s >> v)) throw fail(line);
        if (!(s >> source_tag >> source_n) || source_tag != "source") throw fail(line);
        link.source_channel_map.resize(source_n);
        for (auto& v : link.source_channel_map)
            if (!(s >> v)) throw fail(line);
        model.residual_links.push_back(std::move(link));
    }

    std::size_t param_count;
    {
        std::istringstream s(next_line("param count"));
        std::string tag;
        if (!(s >> tag >> param_count) || tag != "params") throw fail("params");
    }
    struct ParamHeader {
        std::string name;
        std::vector<int> weight_shape;
        int bias_extent = -1;  // -1 = none
    };
    std::vector<ParamHeader> headers;
    for (std::size_t i = 0; i < param_count; ++i) {
        std::string line = next_line("param spec");
        std::istringstream s(line);
        std::string tag, wtag, btag, bval;
        ParamHeader ph;
        int rank;
        if (!(s >> tag >> ph.name >> wtag >> rank) || tag != "param" || wtag != "weight" || rank < 1 || rank > 4)
            throw fail(line);
        ph.weight_shape.resize(static_cast<std::size_t>(rank));
        for (auto& d : ph.weight_shape)
            if (!(s >> d) || d < 1) throw fail(line);
        if (!(s >> btag >> bval) || btag != "bias") throw fail(line);
        if (bval != "none") {
            try {
                ph.bias_extent = std::stoi(bval);
            } catch (const std::exception&) {
                throw fail(line);
            }
            if (ph.bias_extent < 1) throw fail(line);
        }
        headers.push_back(std::move(ph));
    }
    if (next_line("blob sentinel") != "blob") throw ParseError("'" + path + "': missing blob sentinel");

    for (const auto& ph : headers) {
        std::size_t n = 1;
        for (int d : ph.weight_shape) n *= static_cast<std::size_t>(d);
        Tensor weight(ph.weight_shape, read_doubles(f, n, path));
        if (ph.bias_extent >= 0) {
            Tensor bias({ph.bias_extent}, read_doubles(f, static_cast<std::size_t>(ph.bias_extent), path));
            model.add_param(ph.name, std::move(weight), std::move(bias));
        } else {
            model.add_param(ph.name, std::move(weight));
        }
    }
    char extra;
    if (f.read(&extra, 1)) throw ParseError("'" + path + "': trailing bytes after parameter blob");

    try {
        model.validate();
    } catch (const Error& e) {
        throw ParseError("'" + path + "': inconsistent checkpoint: " + std::string(e.what()));
    }
    return model;
}

}  // namespace softprune
