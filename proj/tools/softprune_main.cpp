// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "softprune/checkpoint.hpp"
#include "softprune/errors.hpp"
#include "softprune/experiment.hpp"
#include "softprune/flops.hpp"
#include "softprune/models.hpp"
#include "softprune/prune.hpp"
#include "softprune/schedule.hpp"
#include "softprune/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace softprune;

ModelGraph model_for_arch(const std::string& arch) {
    ModelGraph model;
    if (arch == "resnet20")
        model = make_resnet_cifar(20);
    else if (arch == "resnet56")
        model = make_resnet_cifar(56);
    else if (arch == "resnet110")
        model = make_resnet_cifar(110);
    else if (arch == "toy")
        model = make_toy_cnn(1, 10);
    else
        throw InputError("unknown architecture '" + arch + "' (expected toy, resnet20, resnet56 or resnet110)");
    init_params(model, 0);  // counting wants a fully formed graph
    return model;
}

int cmd_train(const std::string& config_path, const std::string& out_override, bool seed_set, std::uint64_t seed) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_set) cfg.train.seed = seed;
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    ModelGraph model = build_model(cfg);
    auto [train_data, test_data] = build_datasets(cfg);

    const int interval = cfg.checkpoint_interval;
    auto hook = [&](int epoch, const ModelGraph& m) {
        if (interval > 0 && (epoch + 1) % interval == 0)
            save_checkpoint(m, (fs::path(cfg.out_dir) / ("checkpoint_epoch" + std::to_string(epoch) + ".ckpt")).string());
    };

    RunResult result = run(std::move(model), train_data, test_data, cfg.train, hook);

    {
        std::ofstream f(fs::path(cfg.out_dir) / "reports.csv");
        write_reports_csv(f, result.reports);
    }
    save_mask(result.final_mask, (fs::path(cfg.out_dir) / "mask.txt").string());
    save_checkpoint(result.model, (fs::path(cfg.out_dir) / "model_final.ckpt").string());

    const double final_acc = evaluate(result.model, test_data);
    std::cout << "epochs " << result.reports.size() << "\n";
    std::cout << "final_accuracy " << format_double(final_acc) << "\n";
    std::cout << "out_dir " << cfg.out_dir << "\n";
    return 0;
}

int cmd_flops(const std::string& arch, double rate) {
    ModelGraph model = model_for_arch(arch);
    FlopsReport pruned = count_flops(model, rate);
    FlopsReport baseline = count_flops(model, 0.0);
    for (const auto& layer : model.layers) {
        auto it = pruned.per_layer.find(layer.name);
        if (it != pruned.per_layer.end()) std::cout << "layer " << layer.name << " " << it->second << "\n";
    }
    std::cout << "params " << pruned.params_total << "\n";
    std::cout << "baseline " << baseline.total << "\n";
    std::cout << "total " << pruned.total << "\n";
    std::cout << "pruned_percent " << format_double(100.0 * pruned.reduction_vs(baseline)) << "\n";
    return 0;
}

int cmd_compact(const std::string& checkpoint_path, const std::string& mask_path, const std::string& out_path) {
    ModelGraph model = load_checkpoint(checkpoint_path);
    FilterMask mask = load_mask(mask_path, model);
    ModelGraph small = compact(model, mask);
    save_checkpoint(small, out_path);
    FlopsReport before = count_flops(model, 0.0);
    FlopsReport after = count_flops(small, 0.0);
    std::cout << "flops_before " << before.total << "\n";
    std::cout << "flops_after " << after.total << "\n";
    std::cout << "out " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    ModelGraph model = load_checkpoint(checkpoint_path);
    auto [train_data, test_data] = build_datasets(cfg);
    (void)train_data;
    std::cout << "accuracy " << format_double(evaluate(model, test_data)) << "\n";
    return 0;
}

int cmd_schedule(const std::string& config_path, const std::string& out_override) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    fs::path out = out_override.empty() ? fs::path(cfg.out_dir) / "schedule.csv" : fs::path(out_override);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw InputError("cannot open '" + out.string() + "' for writing");
    write_schedule_csv(f, cfg.train.decay, cfg.train.ramp);
    std::cout << "out " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"soft filter pruning toolkit"};
    app.require_subcommand(1);

    std::string config_path, arch, out_path, checkpoint_path, mask_path;
    double rate = 0.0;
    std::uint64_t seed = 0;

    auto* train = app.add_subcommand("train", "run the train/prune/fine-tune pipeline from a config file");
    train->add_option("--config", config_path, "experiment config file")->required();
    train->add_option("--out", out_path, "output directory (overrides the config)");
    auto* seed_opt = train->add_option("--seed", seed, "seed override");

    auto* flops = app.add_subcommand("flops", "report multiply-accumulate counts for an architecture");
    flops->add_option("--arch", arch, "toy, resnet20, resnet56 or resnet110")->required();
    flops->add_option("--rate", rate, "uniform pruning rate in [0, 1]");

    auto* compact_cmd = app.add_subcommand("compact", "physically remove pruned filters from a checkpoint");
    compact_cmd->add_option("--checkpoint", checkpoint_path, "input checkpoint")->required();
    compact_cmd->add_option("--mask", mask_path, "mask file")->required();
    compact_cmd->add_option("--out", out_path, "output checkpoint path")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the config's test split");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate")->required();
    eval_cmd->add_option("--config", config_path, "experiment config naming the dataset")->required();

    auto* schedule_cmd = app.add_subcommand("schedule", "export the per-epoch alpha/rate curves as csv");
    schedule_cmd->add_option("--config", config_path, "experiment config file")->required();
    schedule_cmd->add_option("--out", out_path, "csv output path (default: out_dir/schedule.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, out_path, seed_opt->count() > 0, seed);
        if (flops->parsed()) return cmd_flops(arch, rate);
        if (compact_cmd->parsed()) return cmd_compact(checkpoint_path, mask_path, out_path);
        if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, config_path);
        if (schedule_cmd->parsed()) return cmd_schedule(config_path, out_path);
    } catch (const softprune::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
