// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>

#include "softprune/data.hpp"
#include "softprune/graph.hpp"
#include "softprune/trainer.hpp"

namespace softprune {

/// Method presets couple the two schedule kinds:
///   sfp   - hard zeroize every epoch at the full rate
///   asfp  - hard zeroize, rate ramps up to the target
///   srfp  - soft decay (exponential or linear alpha), full rate throughout
///   asrfp - soft decay plus the rate ramp
enum class Method { sfp, asfp, srfp, asrfp };
enum class Arch { toy, resnet20, resnet56, resnet110 };
enum class DataSource { synthetic, idx, csv };

std::string method_name(Method m);
std::string arch_name(Arch a);

struct DataConfig {
    DataSource source = DataSource::synthetic;
    // synthetic
    int classes = 10;
    int per_class = 200;
    int channels = 1;
    int height = 12;
    int width = 12;
    double noise_sigma = 0.3;
    // file-backed
    std::string train_images, train_labels, test_images, test_labels;
    std::string train_csv, test_csv;
    // post-processing
    bool standardize = false;
};

/// Everything one experiment needs, parsed from a sectioned key=value file.
/// Unknown sections or keys are hard errors listing every offender.
struct ExperimentConfig {
    Method method = Method::sfp;
    Arch arch = Arch::toy;
    std::string out_dir = ".";
    DataConfig data;
    TrainConfig train;
    int checkpoint_interval = 0;  // epochs between checkpoints; 0 = off

    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

/// Architecture descriptor with seeded parameters.
ModelGraph build_model(const ExperimentConfig& config);

/// (train, test) splits from whichever source the config names.
std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config);

}  // namespace softprune
