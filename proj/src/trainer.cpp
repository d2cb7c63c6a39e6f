// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "softprune/errors.hpp"
#include "softprune/flops.hpp"
#include "softprune/kernels.hpp"
#include "softprune/rng.hpp"

namespace softprune {

void TrainConfig::validate() const {
    if (epochs < 2) throw ConfigError("epochs must be >= 2, got " + std::to_string(epochs));
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("momentum must lie in [0, 1), got " + std::to_string(momentum));
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (finetune_epochs < 0) throw ConfigError("finetune_epochs must be >= 0");
    double prev = 0.0;
    for (double m : lr_milestones) {
        if (!(m > 0.0 && m < 1.0) || m <= prev)
            throw ConfigError("lr_milestones must be strictly increasing fractions in (0, 1)");
        prev = m;
    }
    if (decay.t_max != epochs)
        throw ConfigError("decay schedule covers " + std::to_string(decay.t_max) + " epochs but the run has " +
                          std::to_string(epochs));
    decay.validate();
    ramp.validate();
}

double TrainConfig::lr_at(int epoch) const {
    double lr = learning_rate * (pretrained_mode ? 0.1 : 1.0);
    for (double m : lr_milestones)
        if (epoch >= static_cast<int>(std::floor(m * epochs))) lr *= lr_decay;
    return lr;
}

namespace {

struct Velocity {
    std::map<std::string, Tensor> w;
    std::map<std::string, Tensor> b;
};

void accumulate_into(std::map<std::string, Tensor>& acc, const std::map<std::string, Tensor>& g) {
    for (const auto& [name, t] : g) {
        auto it = acc.find(name);
        if (it == acc.end()) {
            acc.emplace(name, t);
        } else {
            double* d = it->second.data();
            const double* s = t.values().data();
            for (int i = 0; i < it->second.numel(); ++i) d[i] += s[i];
        }
    }
}

void sgd_update(Tensor& param, Tensor& vel, const Tensor& grad_sum, int batch_n, double lr, double momentum,
                double weight_decay) {
    double* w = param.data();
    double* v = vel.data();
    const double* gs = grad_sum.values().data();
    const double bn = static_cast<double>(batch_n);
    for (int i = 0; i < param.numel(); ++i) {
        const double g = gs[i] / bn;
        const double nv = momentum * v[i] + g + weight_decay * w[i];
        v[i] = nv;
        w[i] = w[i] - lr * nv;
    }
}

// One full pass over the training set; returns the mean per-sample loss.
double train_one_epoch(ModelGraph& model, const Dataset& train_data, Rng& rng, double lr,
                       const TrainConfig& config, Velocity& vel, int epoch) {
    const int n = train_data.count();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    double total_loss = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
        const int end = std::min(n, start + config.batch_size);
        std::map<std::string, Tensor> gw, gb;
        for (int bi = start; bi < end; ++bi) {
            const int idx = order[static_cast<std::size_t>(bi)];
            Tensor x = train_data.image(idx);
            if (config.hflip && rng.uniform() < 0.5) x = hflip(x);
            auto [logits, cache] = forward(model, x);
            auto [loss, grad_logits] =
                kernels::softmax_cross_entropy(logits, train_data.labels[static_cast<std::size_t>(idx)]);
            if (!std::isfinite(loss))
                throw RunError("training diverged: loss is not finite at epoch " + std::to_string(epoch), epoch);
            total_loss += loss;
            Gradients g = backward(model, cache, grad_logits);
            accumulate_into(gw, g.weights);
            accumulate_into(gb, g.biases);
        }
        const int bn = end - start;
        for (const auto& [name, p] : model.params()) {
            (void)p;
            auto git = gw.find(name);
            if (git == gw.end()) continue;
            Tensor& w = model.mutable_weight(name);
            auto vit = vel.w.find(name);
            if (vit == vel.w.end()) vit = vel.w.emplace(name, Tensor::zeros(w.shape())).first;
            sgd_update(w, vit->second, git->second, bn, lr, config.momentum, config.weight_decay);
            if (Tensor* bias = model.mutable_bias(name)) {
                auto bit = gb.find(name);
                if (bit != gb.end()) {
                    auto vbit = vel.b.find(name);
                    if (vbit == vel.b.end()) vbit = vel.b.emplace(name, Tensor::zeros(bias->shape())).first;
                    sgd_update(*bias, vbit->second, bit->second, bn, lr, config.momentum, config.weight_decay);
                }
            }
        }
    }
    return total_loss / static_cast<double>(n);
}

// Mirrors apply_mask on the momentum state so pruned entries do not carry
// undecayed velocity into the next epoch.
void decay_velocity(Velocity& vel, const ModelGraph& model, const FilterMask& mask, double alpha) {
    for (const auto& [name, kept] : mask.kept) {
        auto it = vel.w.find(name);
        if (it == vel.w.end()) continue;
        Tensor& v = it->second;
        double* d = v.data();
        if (mask.granularity == Granularity::filter) {
            const int layer_idx = model.layer_index(name);
            const int out_ch = model.layers[static_cast<std::size_t>(layer_idx)].out_channels;
            const int slice = v.numel() / out_ch;
            for (int j = 0; j < out_ch; ++j) {
                if (kept[static_cast<std::size_t>(j)]) continue;
                double* f = d + static_cast<std::size_t>(j) * slice;
                for (int i = 0; i < slice; ++i) f[i] = (alpha == 0.0) ? 0.0 : f[i] * alpha;
            }
            auto bit = vel.b.find(name);
            if (bit != vel.b.end()) {
                for (int j = 0; j < out_ch; ++j) {
                    if (kept[static_cast<std::size_t>(j)]) continue;
                    double& bv = bit->second[static_cast<std::size_t>(j)];
                    bv = (alpha == 0.0) ? 0.0 : bv * alpha;
                }
            }
        } else {
            for (int i = 0; i < v.numel(); ++i)
                if (!kept[static_cast<std::size_t>(i)]) d[i] = (alpha == 0.0) ? 0.0 : d[i] * alpha;
        }
    }
}

}  // namespace

double evaluate(const ModelGraph& model, const Dataset& data) {
    data.validate();
    const int n = data.count();
    if (n == 0) throw InputError("cannot evaluate on an empty dataset");
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        auto [logits, cache] = forward(model, data.image(i));
        (void)cache;
        int best = 0;
        for (int c = 1; c < logits.dim(0); ++c)
            if (logits.values()[static_cast<std::size_t>(c)] > logits.values()[static_cast<std::size_t>(best)])
                best = c;
        if (best == data.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

RunResult run(ModelGraph model, const Dataset& train_data, const Dataset& test_data, const TrainConfig& config,
              const std::function<void(int, const ModelGraph&)>& epoch_hook) {
    config.validate();
    train_data.validate();
    test_data.validate();
    if (train_data.count() == 0) throw InputError("training dataset is empty");
    config.prune.validate(model);
    model.validate();

    Rng rng(config.seed);
    Velocity vel;
    RunResult result;
    PruneConfig prune_cfg = config.prune;  // the ramp drives the per-epoch rate

    for (int t = 0; t < config.epochs; ++t) {
        const double alpha = alpha_at(config.decay, t);
        const double rate = rate_at(config.ramp, t, config.epochs);
        const double lr = config.lr_at(t);

        EpochReport report;
        report.epoch = t;
        report.alpha = alpha;
        report.prune_rate = rate;
        report.train_loss = train_one_epoch(model, train_data, rng, lr, config, vel, t);
        report.test_accuracy_before_prune = evaluate(model, test_data);

        prune_cfg.target_rate = rate;
        FilterMask mask = select_mask(model, prune_cfg);
        apply_mask(model, mask, alpha);
        if (config.decay_momentum) decay_velocity(vel, model, mask, alpha);

        report.test_accuracy_after_prune = evaluate(model, test_data);
        report.accuracy_drop = report.test_accuracy_before_prune - report.test_accuracy_after_prune;
        const double flops_rate = (config.prune.granularity == Granularity::filter) ? rate : 0.0;
        report.current_flops = count_flops(model, flops_rate).total;
        result.reports.push_back(report);
        if (epoch_hook) epoch_hook(t, model);
    }

    // Final phase: pin the pruned entries at zero, drop them physically
    // (filter granularity), then fine-tune what is left.
    prune_cfg.target_rate = config.ramp.target_rate;
    FilterMask final_mask = select_mask(model, prune_cfg);
    result.final_mask = final_mask;
    apply_mask(model, final_mask, 0.0);
    if (config.prune.granularity == Granularity::filter) {
        model = compact(model, final_mask);
        vel = Velocity{};  // parameter shapes changed; momentum restarts
    } else {
        decay_velocity(vel, model, final_mask, 0.0);
    }

    const double ft_lr = config.lr_at(config.epochs - 1);
    for (int t = 0; t < config.finetune_epochs; ++t) {
        train_one_epoch(model, train_data, rng, ft_lr, config, vel, config.epochs + t);
        if (config.prune.granularity == Granularity::weight) {
            apply_mask(model, final_mask, 0.0);
            if (config.decay_momentum) decay_velocity(vel, model, final_mask, 0.0);
        }
    }

    result.model = std::move(model);
    return result;
}

void write_reports_csv(std::ostream& out, const std::vector<EpochReport>& reports) {
    out << "epoch,train_loss,test_accuracy_before_prune,test_accuracy_after_prune,accuracy_drop,alpha,prune_rate,"
           "current_flops\n";
    for (const auto& r : reports) {
        out << r.epoch << "," << format_double(r.train_loss) << "," << format_double(r.test_accuracy_before_prune)
            << "," << format_double(r.test_accuracy_after_prune) << "," << format_double(r.accuracy_drop) << ","
            << format_double(r.alpha) << "," << format_double(r.prune_rate) << "," << r.current_flops << "\n";
    }
}

std::vector<EpochReport> read_reports_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("reports csv: missing header");
    if (line.rfind("epoch,train_loss,", 0) != 0) throw ParseError("reports csv: unexpected header '" + line + "'");
    std::vector<EpochReport> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream s(line);
        EpochReport r;
        char c;
        if (!(s >> r.epoch >> c >> r.train_loss >> c >> r.test_accuracy_before_prune >> c >>
              r.test_accuracy_after_prune >> c >> r.accuracy_drop >> c >> r.alpha >> c >> r.prune_rate >> c >>
              r.current_flops))
            throw ParseError("reports csv line " + std::to_string(line_no) + ": malformed row");
        out.push_back(r);
    }
    return out;
}

}  // namespace softprune
