// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "softprune/errors.hpp"
#include "softprune/models.hpp"

namespace softprune {

std::string method_name(Method m) {
    switch (m) {
        case Method::sfp: return "sfp";
        case Method::asfp: return "asfp";
        case Method::srfp: return "srfp";
        case Method::asrfp: return "asrfp";
    }
    return "?";
}

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::toy: return "toy";
        case Arch::resnet20: return "resnet20";
        case Arch::resnet56: return "resnet56";
        case Arch::resnet110: return "resnet110";
    }
    return "?";
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct RawConfig {
    // section -> key -> value, remembering which keys were consumed
    std::map<std::string, std::map<std::string, std::string>> values;
    mutable std::map<std::string, std::map<std::string, bool>> used;

    bool has(const std::string& sec, const std::string& key) const {
        auto s = values.find(sec);
        return s != values.end() && s->second.count(key) != 0;
    }
    std::string take(const std::string& sec, const std::string& key) const {
        used[sec][key] = true;
        return values.at(sec).at(key);
    }
};

RawConfig parse_ini(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3)
                throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header '" + t + "'");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (section.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key + "' outside any section");
        if (raw.values[section].count(key))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "' in [" +
                              section + "]");
        raw.values[section][key] = value;
    }
    return raw;
}

int parse_int(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        int r = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected an integer, got '" + v + "'");
    }
}

double parse_num(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(where + ": expected a boolean (true/false), got '" + v + "'");
}

std::vector<double> parse_fraction_list(const std::string& v, const std::string& where) {
    std::vector<double> out;
    std::istringstream s(v);
    std::string cell;
    while (std::getline(s, cell, ',')) out.push_back(parse_num(trim(cell), where));
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    train.validate();
    if (checkpoint_interval < 0) throw ConfigError("[train] checkpoint_interval must be >= 0");
    if (out_dir.empty()) throw ConfigError("[experiment] out_dir must not be empty");
    if (arch != Arch::toy) {
        if (data.channels != 3 && data.source == DataSource::synthetic)
            throw ConfigError("[data] channels must be 3 for residual architectures, got " +
                              std::to_string(data.channels));
        if ((data.height != 32 || data.width != 32) && data.source == DataSource::synthetic)
            throw ConfigError("[data] residual architectures expect 32x32 inputs");
    }
    switch (method) {
        case Method::sfp:
            if (train.decay.kind != DecaySchedule::Kind::constant_zero)
                throw ConfigError("method sfp requires constant-zero decay");
            if (train.ramp.kind != RateRamp::Kind::constant)
                throw ConfigError("method sfp requires a constant rate");
            break;
        case Method::asfp:
            if (train.decay.kind != DecaySchedule::Kind::constant_zero)
                throw ConfigError("method asfp requires constant-zero decay");
            if (train.ramp.kind != RateRamp::Kind::exponential_approach)
                throw ConfigError("method asfp requires an exponential-approach rate ramp");
            break;
        case Method::srfp:
            if (train.decay.kind == DecaySchedule::Kind::constant_zero)
                throw ConfigError("method srfp requires an exponential or linear decay");
            if (train.ramp.kind != RateRamp::Kind::constant)
                throw ConfigError("method srfp requires a constant rate");
            break;
        case Method::asrfp:
            if (train.decay.kind == DecaySchedule::Kind::constant_zero)
                throw ConfigError("method asrfp requires an exponential or linear decay");
            if (train.ramp.kind != RateRamp::Kind::exponential_approach)
                throw ConfigError("method asrfp requires an exponential-approach rate ramp");
            break;
    }
    if (data.source == DataSource::synthetic) {
        if (data.classes < 2) throw ConfigError("[data] classes must be >= 2");
        if (data.per_class < 1) throw ConfigError("[data] per_class must be >= 1");
        if (data.channels < 1 || data.height < 1 || data.width < 1)
            throw ConfigError("[data] image dims must be positive");
        if (!(data.noise_sigma >= 0.0)) throw ConfigError("[data] noise_sigma must be >= 0");
    } else if (data.source == DataSource::idx) {
        if (data.train_images.empty()) throw ConfigError("[data] train_images is required for source = idx");
        if (data.train_labels.empty()) throw ConfigError("[data] train_labels is required for source = idx");
        if (data.test_images.empty()) throw ConfigError("[data] test_images is required for source = idx");
        if (data.test_labels.empty()) throw ConfigError("[data] test_labels is required for source = idx");
    } else {
        if (data.train_csv.empty()) throw ConfigError("[data] train_csv is required for source = csv");
        if (data.test_csv.empty()) throw ConfigError("[data] test_csv is required for source = csv");
    }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    RawConfig raw = parse_ini(text);
    ExperimentConfig cfg;

    if (raw.has("experiment", "method")) {
        std::string m = raw.take("experiment", "method");
        if (m == "sfp")
            cfg.method = Method::sfp;
        else if (m == "asfp")
            cfg.method = Method::asfp;
        else if (m == "srfp")
            cfg.method = Method::srfp;
        else if (m == "asrfp")
            cfg.method = Method::asrfp;
        else
            throw ConfigError("[experiment] method: unknown method '" + m + "'");
    }
    if (raw.has("experiment", "arch")) {
        std::string a = raw.take("experiment", "arch");
        if (a == "toy")
            cfg.arch = Arch::toy;
        else if (a == "resnet20")
            cfg.arch = Arch::resnet20;
        else if (a == "resnet56")
            cfg.arch = Arch::resnet56;
        else if (a == "resnet110")
            cfg.arch = Arch::resnet110;
        else
            throw ConfigError("[experiment] arch: unknown architecture '" + a + "'");
    }
    if (raw.has("experiment", "out_dir")) cfg.out_dir = raw.take("experiment", "out_dir");
    if (raw.has("experiment", "seed"))
        cfg.train.seed = static_cast<std::uint64_t>(
            std::stoull(raw.take("experiment", "seed")));

    if (raw.has("data", "source")) {
        std::string s = raw.take("data", "source");
        if (s == "synthetic")
            cfg.data.source = DataSource::synthetic;
        else if (s == "idx")
            cfg.data.source = DataSource::idx;
        else if (s == "csv")
            cfg.data.source = DataSource::csv;
        else
            throw ConfigError("[data] source: unknown source '" + s + "'");
    }
    if (raw.has("data", "classes")) cfg.data.classes = parse_int(raw.take("data", "classes"), "[data] classes");
    if (raw.has("data", "per_class"))
        cfg.data.per_class = parse_int(raw.take("data", "per_class"), "[data] per_class");
    if (raw.has("data", "channels")) cfg.data.channels = parse_int(raw.take("data", "channels"), "[data] channels");
    if (raw.has("data", "height")) cfg.data.height = parse_int(raw.take("data", "height"), "[data] height");
    if (raw.has("data", "width")) cfg.data.width = parse_int(raw.take("data", "width"), "[data] width");
    if (raw.has("data", "noise_sigma"))
        cfg.data.noise_sigma = parse_num(raw.take("data", "noise_sigma"), "[data] noise_sigma");
    if (raw.has("data", "train_images")) cfg.data.train_images = raw.take("data", "train_images");
    if (raw.has("data", "train_labels")) cfg.data.train_labels = raw.take("data", "train_labels");
    if (raw.has("data", "test_images")) cfg.data.test_images = raw.take("data", "test_images");
    if (raw.has("data", "test_labels")) cfg.data.test_labels = raw.take("data", "test_labels");
    if (raw.has("data", "train_csv")) cfg.data.train_csv = raw.take("data", "train_csv");
    if (raw.has("data", "test_csv")) cfg.data.test_csv = raw.take("data", "test_csv");
    if (raw.has("data", "hflip")) cfg.train.hflip = parse_bool(raw.take("data", "hflip"), "[data] hflip");
    if (raw.has("data", "standardize"))
        cfg.data.standardize = parse_bool(raw.take("data", "standardize"), "[data] standardize");

    if (raw.has("train", "epochs")) cfg.train.epochs = parse_int(raw.take("train", "epochs"), "[train] epochs");
    if (raw.has("train", "batch_size"))
        cfg.train.batch_size = parse_int(raw.take("train", "batch_size"), "[train] batch_size");
    if (raw.has("train", "learning_rate"))
        cfg.train.learning_rate = parse_num(raw.take("train", "learning_rate"), "[train] learning_rate");
    if (raw.has("train", "lr_milestones"))
        cfg.train.lr_milestones =
            parse_fraction_list(raw.take("train", "lr_milestones"), "[train] lr_milestones");
    if (raw.has("train", "lr_decay")) cfg.train.lr_decay = parse_num(raw.take("train", "lr_decay"), "[train] lr_decay");
    if (raw.has("train", "momentum")) cfg.train.momentum = parse_num(raw.take("train", "momentum"), "[train] momentum");
    if (raw.has("train", "weight_decay"))
        cfg.train.weight_decay = parse_num(raw.take("train", "weight_decay"), "[train] weight_decay");
    if (raw.has("train", "finetune_epochs"))
        cfg.train.finetune_epochs = parse_int(raw.take("train", "finetune_epochs"), "[train] finetune_epochs");
    if (raw.has("train", "pretrained_mode"))
        cfg.train.pretrained_mode = parse_bool(raw.take("train", "pretrained_mode"), "[train] pretrained_mode");
    if (raw.has("train", "decay_momentum"))
        cfg.train.decay_momentum = parse_bool(raw.take("train", "decay_momentum"), "[train] decay_momentum");
    if (raw.has("train", "checkpoint_interval"))
        cfg.checkpoint_interval = parse_int(raw.take("train", "checkpoint_interval"), "[train] checkpoint_interval");

    if (raw.has("prune", "rate")) {
        const double rate = parse_num(raw.take("prune", "rate"), "[prune] rate");
        cfg.train.prune.target_rate = rate;
        cfg.train.ramp.target_rate = rate;
    }
    if (raw.has("prune", "granularity")) {
        std::string g = raw.take("prune", "granularity");
        if (g == "filter")
            cfg.train.prune.granularity = Granularity::filter;
        else if (g == "weight")
            cfg.train.prune.granularity = Granularity::weight;
        else
            throw ConfigError("[prune] granularity: expected filter or weight, got '" + g + "'");
    }
    if (raw.has("prune", "norm")) {
        std::string n = raw.take("prune", "norm");
        if (n == "l2")
            cfg.train.prune.norm = NormKind::l2;
        else if (n == "l1")
            cfg.train.prune.norm = NormKind::l1;
        else
            throw ConfigError("[prune] norm: expected l2 or l1, got '" + n + "'");
    }

    // Method presets pick the schedule kinds; explicit keys may override
    // only to a value the preset allows (validate() enforces that).
    switch (cfg.method) {
        case Method::sfp:
            cfg.train.decay.kind = DecaySchedule::Kind::constant_zero;
            cfg.train.ramp.kind = RateRamp::Kind::constant;
            break;
        case Method::asfp:
            cfg.train.decay.kind = DecaySchedule::Kind::constant_zero;
            cfg.train.ramp.kind = RateRamp::Kind::exponential_approach;
            break;
        case Method::srfp:
            cfg.train.decay.kind = DecaySchedule::Kind::exponential;
            cfg.train.ramp.kind = RateRamp::Kind::constant;
            break;
        case Method::asrfp:
            cfg.train.decay.kind = DecaySchedule::Kind::exponential;
            cfg.train.ramp.kind = RateRamp::Kind::exponential_approach;
            break;
    }
    if (raw.has("decay", "kind")) {
        std::string k = raw.take("decay", "kind");
        if (k == "exponential")
            cfg.train.decay.kind = DecaySchedule::Kind::exponential;
        else if (k == "linear")
            cfg.train.decay.kind = DecaySchedule::Kind::linear;
        else if (k == "constant-zero")
            cfg.train.decay.kind = DecaySchedule::Kind::constant_zero;
        else
            throw ConfigError("[decay] kind: expected exponential, linear or constant-zero, got '" + k + "'");
    }
    if (raw.has("decay", "alpha0")) cfg.train.decay.alpha0 = parse_num(raw.take("decay", "alpha0"), "[decay] alpha0");
    if (raw.has("decay", "epsilon"))
        cfg.train.decay.epsilon = parse_num(raw.take("decay", "epsilon"), "[decay] epsilon");
    if (raw.has("decay", "clamp_floor"))
        cfg.train.decay.clamp_floor = parse_num(raw.take("decay", "clamp_floor"), "[decay] clamp_floor");
    if (raw.has("ramp", "kind")) {
        std::string k = raw.take("ramp", "kind");
        if (k == "constant")
            cfg.train.ramp.kind = RateRamp::Kind::constant;
        else if (k == "exponential-approach")
            cfg.train.ramp.kind = RateRamp::Kind::exponential_approach;
        else
            throw ConfigError("[ramp] kind: expected constant or exponential-approach, got '" + k + "'");
    }
    if (raw.has("ramp", "tau")) cfg.train.ramp.tau = parse_num(raw.take("ramp", "tau"), "[ramp] tau");

    // Every key must have been consumed; report all strays at once.
    std::vector<std::string> unknown;
    for (const auto& [sec, kv] : raw.values) {
        static const std::vector<std::string> known_sections = {"experiment", "data", "train", "prune", "decay",
                                                                "ramp"};
        const bool known_sec =
            std::find(known_sections.begin(), known_sections.end(), sec) != known_sections.end();
        for (const auto& [key, value] : kv) {
            (void)value;
            if (!known_sec || !raw.used[sec][key]) unknown.push_back("[" + sec + "] " + key);
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config key(s):";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }

    cfg.train.decay.t_max = cfg.train.epochs;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_experiment_config(buf.str());
}

ModelGraph build_model(const ExperimentConfig& config) {
    ModelGraph model;
    switch (config.arch) {
        case Arch::toy:
            model = make_toy_cnn(config.data.channels, config.data.classes, config.data.height, config.data.width);
            break;
        case Arch::resnet20: model = make_resnet_cifar(20, config.data.classes); break;
        case Arch::resnet56: model = make_resnet_cifar(56, config.data.classes); break;
        case Arch::resnet110: model = make_resnet_cifar(110, config.data.classes); break;
    }
    init_params(model, config.train.seed);
    return model;
}

std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config) {
    std::pair<Dataset, Dataset> split;
    switch (config.data.source) {
        case DataSource::synthetic:
            split = synth_blobs(config.data.classes, config.data.per_class, config.data.channels, config.data.height,
                                config.data.width, config.data.noise_sigma, config.train.seed);
            break;
        case DataSource::idx:
            split.first = load_idx(config.data.train_images, config.data.train_labels);
            split.second = load_idx(config.data.test_images, config.data.test_labels);
            break;
        case DataSource::csv:
            split.first = load_csv(config.data.train_csv);
            split.second = load_csv(config.data.test_csv);
            break;
    }
    if (config.data.source != DataSource::synthetic) {
        // [data] classes is authoritative so the classifier width and the
        // label range always agree; out-of-range labels fail validation.
        split.first.classes = config.data.classes;
        split.second.classes = config.data.classes;
        split.second.split = "test";
        split.first.validate();
        split.second.validate();
    }
    if (config.data.standardize) standardize(split.first, split.second);
    return split;
}

}  // namespace softprune
