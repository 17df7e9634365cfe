#include "w2s/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace w2s {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& name, const std::set<std::string>& allowed) {
    if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
    for (const auto& [key, value] : section.items()) {
        if (!allowed.contains(key)) throw ConfigError("unknown key '" + name + "." + key + "'");
    }
}

template <typename T>
void read(const json& section, const std::string& section_name, const char* key, T& out) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + section_name + "." + key + "' has the wrong type");
    }
}

void parse_data(const json& j, RunConfig& cfg) {
    reject_unknown(j, "data", {"train", "test", "split", "seed", "stratified", "augment", "allow_repeats"});
    std::string path;
    read(j, "data", "train", path);
    cfg.data.train = path;
    path.clear();
    read(j, "data", "test", path);
    cfg.data.test = path;
    read(j, "data", "split", cfg.data.split.ratios);
    read(j, "data", "seed", cfg.data.split.seed);
    read(j, "data", "stratified", cfg.data.split.stratified);
    read(j, "data", "allow_repeats", cfg.data.allow_repeats);
    if (j.contains("augment")) {
        const json& aug = j.at("augment");
        if (!aug.is_object()) throw ConfigError("data.augment must map class names to target counts");
        for (const auto& [name, target] : aug.items()) {
            try {
                cfg.data.augment[parse_class(name)] = target.get<std::size_t>();
            } catch (const json::exception&) {
                throw ConfigError("data.augment." + name + " must be a non-negative integer");
            } catch (const InputError& e) {
                throw ConfigError(std::string("data.augment: ") + e.what());
            }
        }
    }
    try {
        cfg.data.split.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("data.split: ") + e.what());
    }
}

void parse_model(const json& j, RunConfig& cfg) {
    reject_unknown(j, "model",
                   {"variant", "time_steps", "v_thr", "v_reset", "surrogate_width", "encoder_channels", "fc_units",
                    "w_scd_init", "w_vd_init", "init_scale", "convs"});
    std::string variant = variant_name(cfg.variant);
    read(j, "model", "variant", variant);
    try {
        cfg.variant = parse_variant(variant);
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    NetworkConfig m = NetworkConfig::for_variant(cfg.variant);
    std::int64_t steps = m.time_steps;
    read(j, "model", "time_steps", steps);
    m.time_steps = steps;
    read(j, "model", "v_thr", m.v_thr);
    read(j, "model", "v_reset", m.v_reset);
    read(j, "model", "surrogate_width", cfg.train.surrogate.width);
    std::int64_t enc = m.encoder_channels, fc = m.fc_units;
    read(j, "model", "encoder_channels", enc);
    read(j, "model", "fc_units", fc);
    m.encoder_channels = enc;
    m.fc_units = fc;
    read(j, "model", "w_scd_init", m.w_scd_init);
    read(j, "model", "w_vd_init", m.w_vd_init);
    read(j, "model", "init_scale", m.init_scale);
    if (!(m.init_scale > 0.0)) throw ConfigError("model.init_scale must be positive");
    if (j.contains("convs")) {
        const json& convs = j.at("convs");
        if (!convs.is_array()) throw ConfigError("model.convs must be an array");
        m.convs.clear();
        for (const json& c : convs) {
            reject_unknown(c, "model.convs[]", {"channels", "kernel", "stride", "padding"});
            ConvLayerSpec spec{128, 3, 1, 0};
            std::int64_t ch = spec.channels, k = spec.kernel, s = spec.stride, p = spec.padding;
            read(c, "model.convs[]", "channels", ch);
            read(c, "model.convs[]", "kernel", k);
            read(c, "model.convs[]", "stride", s);
            read(c, "model.convs[]", "padding", p);
            m.convs.push_back({ch, k, s, p});
        }
    }
    try {
        m.describe();
        cfg.train.surrogate.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    cfg.model = m;
    cfg.train.time_steps = m.time_steps;
}

void parse_train(const json& j, RunConfig& cfg) {
    reject_unknown(j, "train",
                   {"optimizer", "learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "lr_step_epochs",
                    "lr_gamma", "batch_size", "epochs", "seed", "deterministic", "resume"});
    auto& t = cfg.train;
    std::string opt = t.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd";
    read(j, "train", "optimizer", opt);
    if (opt == "adam") {
        t.optimizer.kind = OptimizerKind::Adam;
    } else if (opt == "sgd") {
        t.optimizer.kind = OptimizerKind::Sgd;
    } else {
        throw ConfigError("train.optimizer must be 'adam' or 'sgd'");
    }
    read(j, "train", "learning_rate", t.optimizer.learning_rate);
    read(j, "train", "beta1", t.optimizer.beta1);
    read(j, "train", "beta2", t.optimizer.beta2);
    read(j, "train", "epsilon", t.optimizer.epsilon);
    read(j, "train", "weight_decay", t.optimizer.weight_decay);
    std::int64_t step_epochs = t.lr_step_epochs, batch = t.batch_size, epochs = t.epochs;
    read(j, "train", "lr_step_epochs", step_epochs);
    read(j, "train", "batch_size", batch);
    read(j, "train", "epochs", epochs);
    t.lr_step_epochs = step_epochs;
    t.batch_size = batch;
    t.epochs = epochs;
    read(j, "train", "lr_gamma", t.lr_gamma);
    read(j, "train", "seed", t.seed);
    read(j, "train", "deterministic", t.deterministic);
    std::string resume;
    read(j, "train", "resume", resume);
    cfg.resume = resume;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j, "", {"data", "model", "train", "output"});
    RunConfig cfg;
    // model first: the surrogate width lives there but is stored with training.
    if (j.contains("model")) parse_model(j.at("model"), cfg);
    if (j.contains("data")) parse_data(j.at("data"), cfg);
    if (j.contains("train")) parse_train(j.at("train"), cfg);
    if (j.contains("output")) {
        reject_unknown(j.at("output"), "output", {"dir"});
        std::string dir = cfg.output_dir.string();
        read(j.at("output"), "output", "dir", dir);
        cfg.output_dir = dir;
    }
    try {
        cfg.train.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

}  // namespace w2s
