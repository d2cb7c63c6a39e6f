// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "softprune/data.hpp"
#include "softprune/graph.hpp"
#include "softprune/prune.hpp"
#include "softprune/schedule.hpp"

namespace softprune {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 0.1;
    std::vector<double> lr_milestones = {0.5, 0.75};  // fractions of epochs
    double lr_decay = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
    bool pretrained_mode = false;  // fine-tuning an existing model: base lr x 0.1
    bool decay_momentum = true;    // scale pruned filters' momentum by the same alpha
    bool hflip = false;            // random horizontal flip on training samples
    int finetune_epochs = 0;
    PruneConfig prune;
    DecaySchedule decay;
    RateRamp ramp;

    void validate() const;
    double lr_at(int epoch) const;  // base (maybe scaled) stepped at the milestones
};

/// One row of the per-epoch metrics stream.
struct EpochReport {
    int epoch = 0;
    double train_loss = 0.0;
    double test_accuracy_before_prune = 0.0;
    double test_accuracy_after_prune = 0.0;
    double accuracy_drop = 0.0;  // before - after
    double alpha = 0.0;
    double prune_rate = 0.0;
    long long current_flops = 0;
};

struct RunResult {
    ModelGraph model;  // compacted (filter granularity) or masked (weight granularity)
    std::vector<EpochReport> reports;
    FilterMask final_mask;  // selection the final zeroize/compact step used
};

/// Full pipeline: `epochs` rounds of SGD-train / evaluate / select / softly
/// mask, then zeroize at the target rate, compact, and fine-tune. The
/// optional hook fires after each main epoch (for periodic checkpoints).
/// Throws RunError with the epoch index if the loss diverges.
RunResult run(ModelGraph model, const Dataset& train_data, const Dataset& test_data, const TrainConfig& config,
              const std::function<void(int, const ModelGraph&)>& epoch_hook = {});

/// Fraction of samples whose argmax logit matches the label (ties resolve to
/// the lowest class index).
double evaluate(const ModelGraph& model, const Dataset& data);

/// Versioned header plus one row per report.
void write_reports_csv(std::ostream& out, const std::vector<EpochReport>& reports);
std::vector<EpochReport> read_reports_csv(std::istream& in);

}  // namespace softprune
