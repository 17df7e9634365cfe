#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "w2s/network_config.hpp"
#include "w2s/training.hpp"
#include "w2s/wafer.hpp"

namespace w2s {

/// Contents of a run config file (JSON). Every key is optional and defaults
/// to the value below; unknown keys are rejected with ConfigError.
///
/// {
///   "data":   { "train": "<wfm>", "test": "<wfm>", "split": [0.8, 0.2],
///               "seed": 0, "stratified": true,
///               "augment": { "<Class>": <target count>, ... }, "allow_repeats": false },
///   "model":  { "variant": "2C", "time_steps": 4, "v_thr": 1.0, "v_reset": 0.0,
///               "surrogate_width": 1.0, "encoder_channels": 64, "fc_units": 256,
///               "w_scd_init": 0.7, "w_vd_init": 0.8, "init_scale": 6.0,
///               "convs": [ { "channels": 128, "kernel": 3, "stride": 2, "padding": 0 }, ... ] },
///   "train":  { "optimizer": "adam", "learning_rate": 0.001, "beta1": 0.9, "beta2": 0.999,
///               "epsilon": 1e-8, "weight_decay": 0.0, "lr_step_epochs": 0, "lr_gamma": 1.0,
///               "batch_size": 64, "epochs": 10, "seed": 0, "deterministic": true,
///               "resume": "<w2s checkpoint>" },
///   "output": { "dir": "out" }
/// }
///
/// With "test" set, the whole "train" file is used for training and "test"
/// for evaluation; otherwise "train" is split by "split" and the last part is
/// held out. "augment" is applied to the training part only.
struct RunConfig {
    struct Data {
        std::filesystem::path train;
        std::filesystem::path test;
        SplitSpec split{};
        std::map<ClassLabel, std::size_t> augment;
        bool allow_repeats = false;
    } data;

    Variant variant = Variant::C2;
    NetworkConfig model = NetworkConfig::for_variant(Variant::C2);
    TrainConfig train{};
    std::filesystem::path resume;
    std::filesystem::path output_dir = "out";
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace w2s
