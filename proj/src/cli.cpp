#include "w2s/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "w2s/checkpoint.hpp"
#include "w2s/energy.hpp"
#include "w2s/metrics.hpp"
#include "w2s/run_config.hpp"
#include "w2s/wafer.hpp"

namespace w2s::cli {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is not set");
    if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
    std::ofstream os(path, std::ios::out | mode);
    if (!os) throw IoError("cannot write " + path.string());
    return os;
}

std::string exact(double v) {
    std::ostringstream s;
    s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return s.str();
}

void write_evaluation(const fs::path& dir, const Evaluation& ev, std::ostream& out) {
    ensure_dir(dir);
    auto metrics = open_out(dir / "metrics.txt");
    write_metrics_report(metrics, ev.metrics, class_names());
    auto csv = open_out(dir / "confusion.csv");
    write_confusion_csv(csv, ev.confusion, class_names());
    print_metrics_table(out, ev.metrics, class_names());
}

Dataset pick_split(const Dataset& data, const SplitSpec& spec, const std::string& which) {
    if (which == "all") return data;
    auto parts = split(data, spec);
    if (which == "train") return parts.front();
    if (which == "test") return parts.back();
    if (which == "val") {
        if (parts.size() != 3) throw ConfigError("--split val needs three split ratios");
        return parts[1];
    }
    throw ConfigError("--split must be one of all, train, val, test");
}

std::vector<double> parse_ratios(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad split ratio '" + item + "'");
        }
    }
    return out;
}

// Ratios may be given as "0.8,0.2" or "8:2"; colon form is normalised.
SplitSpec split_spec(const std::string& ratios, std::uint64_t seed, bool no_stratify) {
    SplitSpec spec;
    const bool colon = ratios.find(':') != std::string::npos;
    std::string text = ratios;
    if (colon) std::replace(text.begin(), text.end(), ':', ',');
    spec.ratios = parse_ratios(text);
    if (colon) {
        double total = 0.0;
        for (double r : spec.ratios) total += r;
        if (total <= 0.0) throw ConfigError("split ratios must be positive");
        for (double& r : spec.ratios) r /= total;
    }
    spec.seed = seed;
    spec.stratified = !no_stratify;
    try {
        spec.validate();
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

// --- commands -------------------------------------------------------------------

struct SynthArgs {
    std::size_t per_class = 10;
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
    const Dataset data = generate_synthetic(a.per_class, a.seed);
    save_wfm(a.out, data);
    out << "wrote " << data.size() << " maps to " << a.out << '\n';
}

struct ImportArgs {
    std::string csv;
    std::string out;
    bool resize = false;
};

void cmd_import(const ImportArgs& a, std::ostream& out) {
    require_file(a.csv, "CSV file");
    Dataset data = import_csv(a.csv);
    if (a.resize) {
        for (auto& m : data.maps) {
            if (m.height != kWaferSize || m.width != kWaferSize) m = resize_nearest(m);
        }
    }
    save_wfm(a.out, data);
    out << "imported " << data.size() << " maps to " << a.out << '\n';
}

struct AugmentArgs {
    std::string data;
    std::string out;
    std::vector<std::string> targets;
    std::uint64_t seed = 0;
    bool allow_repeats = false;
};

void cmd_augment(const AugmentArgs& a, std::ostream& out, std::ostream& err) {
    require_file(a.data, "data file");
    AugmentOptions opts;
    opts.seed = a.seed;
    opts.allow_repeats = a.allow_repeats;
    for (const auto& t : a.targets) {
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("--target expects Class=count, got '" + t + "'");
        try {
            std::size_t used = 0;
            const std::string count = t.substr(eq + 1);
            const unsigned long long n = std::stoull(count, &used);
            if (used != count.size()) throw std::invalid_argument(count);
            opts.targets[parse_class(t.substr(0, eq))] = static_cast<std::size_t>(n);
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        } catch (const std::exception&) {
            throw ConfigError("--target expects Class=count, got '" + t + "'");
        }
    }
    const auto result = augment_minority(load_wfm(a.data), opts);
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    save_wfm(a.out, result.data);
    out << "wrote " << result.data.size() << " maps to " << a.out << '\n';
}

struct SplitArgs {
    std::string data;
    std::string ratios = "0.8,0.2";
    std::uint64_t seed = 0;
    bool no_stratify = false;
    std::string out = ".";
};

void cmd_split(const SplitArgs& a, std::ostream& out) {
    require_file(a.data, "data file");
    const SplitSpec spec = split_spec(a.ratios, a.seed, a.no_stratify);
    const auto parts = split(load_wfm(a.data), spec);
    static const std::vector<std::vector<std::string>> names{{"all"}, {"train", "test"}, {"train", "val", "test"}};
    ensure_dir(a.out);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const fs::path path = fs::path(a.out) / (names[parts.size() - 1][i] + ".wfm");
        save_wfm(path, parts[i]);
        out << path.string() << ": " << parts[i].size() << " maps\n";
    }
}

struct TrainArgs {
    std::string config;
    std::optional<std::int64_t> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
    std::optional<std::int64_t> batch;
    std::optional<std::string> out;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
    RunConfig cfg = load_run_config(a.config);
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.lr) cfg.train.optimizer.learning_rate = *a.lr;
    if (a.batch) cfg.train.batch_size = *a.batch;
    if (a.out) cfg.output_dir = *a.out;
    try {
        cfg.train.validate();
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }

    require_file(cfg.data.train, "training data");
    if (!cfg.data.test.empty()) require_file(cfg.data.test, "test data");
    if (!cfg.resume.empty()) require_file(cfg.resume, "resume checkpoint");

    Dataset train_set, test_set;
    const Dataset all = load_wfm(cfg.data.train);
    if (!cfg.data.test.empty()) {
        train_set = all;
        test_set = load_wfm(cfg.data.test);
    } else {
        auto parts = split(all, cfg.data.split);
        train_set = parts.front();
        if (parts.size() > 1) test_set = parts.back();
    }
    if (!cfg.data.augment.empty()) {
        AugmentOptions opts{cfg.data.augment, cfg.data.split.seed, cfg.data.allow_repeats};
        train_set = augment_minority(train_set, opts).data;
    }

    Network<float> net(cfg.model, cfg.train.seed);
    Index first_epoch = 1;
    if (!cfg.resume.empty()) {
        Checkpoint ck = load_checkpoint(cfg.resume);
        if (!same_architecture(ck.network.config(), cfg.model)) {
            throw ConfigError("checkpoint " + cfg.resume.string() + " does not match the configured architecture");
        }
        net = std::move(ck.network);
        first_epoch = static_cast<Index>(ck.epoch) + 1;
    }

    ensure_dir(cfg.output_dir);
    auto log = open_out(cfg.output_dir / "train_log.txt", first_epoch > 1 ? std::ios::app : std::ios::trunc);
    const auto data = to_tensor_dataset<float>(train_set);
    out << "training " << variant_name(cfg.variant) << " on " << data.size() << " maps, " << cfg.train.epochs
        << " epochs, T = " << cfg.train.time_steps << '\n';
    const EpochCallback<float> on_epoch = [&](const LossReport& r, const Network<float>& n) {
            log << "epoch=" << r.epoch << " mean_loss=" << exact(r.loss) << " train_accuracy=" << exact(r.train_accuracy)
                << " wall_seconds=" << std::fixed << std::setprecision(3) << r.wall_seconds << std::defaultfloat
                << '\n';
            log.flush();
            save_checkpoint(cfg.output_dir / ("model_epoch" + std::to_string(r.epoch) + ".w2s"), n,
                            static_cast<std::uint32_t>(r.epoch));
            out << "epoch " << r.epoch << "  loss " << std::setprecision(6) << r.loss << "  train_acc "
                << r.train_accuracy << "  (" << std::fixed << std::setprecision(1) << r.wall_seconds << " s)"
                << std::defaultfloat << '\n';
        return true;
    };
    train(data, net, cfg.train, on_epoch, first_epoch);

    const Dataset& held = test_set.empty() ? train_set : test_set;
    const auto ev = evaluate(to_tensor_dataset<float>(held), net, cfg.train.batch_size, cfg.train.surrogate);
    out << (test_set.empty() ? "training-set" : "held-out") << " evaluation on " << held.size() << " maps\n";
    write_evaluation(cfg.output_dir, ev, out);
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string which = "test";
    std::string ratios = "0.8,0.2";
    std::uint64_t seed = 0;
    bool no_stratify = false;
    std::string config;
    std::string out = ".";
    std::int64_t batch = 64;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    require_file(a.checkpoint, "checkpoint");
    require_file(a.data, "data file");
    SplitSpec spec = split_spec(a.ratios, a.seed, a.no_stratify);
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    if (!a.config.empty()) {
        const RunConfig cfg = load_run_config(a.config);
        if (!same_architecture(ck.network.config(), cfg.model)) {
            throw ConfigError("checkpoint " + a.checkpoint + " does not match the architecture in " + a.config);
        }
        spec = cfg.data.split;
    }
    const Dataset chosen = pick_split(load_wfm(a.data), spec, a.which);
    if (chosen.empty()) throw InputError("evaluation set '" + a.which + "' is empty");
    const auto ev = evaluate(to_tensor_dataset<float>(chosen), ck.network, a.batch);
    out << "evaluated " << chosen.size() << " maps (" << a.which << ")\n";
    write_evaluation(a.out, ev, out);
}

struct EnergyArgs {
    std::string checkpoint;
    std::string data;
    std::optional<std::int64_t> steps;
    std::optional<double> flops;
    std::string model;
    std::optional<std::int64_t> max_samples;
    std::string out = ".";
};

void cmd_energy(const EnergyArgs& a, std::ostream& out) {
    EnergyReport report;
    if (a.flops) {
        report = baseline_energy(a.model.empty() ? "baseline" : a.model, *a.flops);
    } else {
        if (a.checkpoint.empty() || a.data.empty()) {
            throw ConfigError("energy needs --checkpoint and --data, or --flops for baseline mode");
        }
        require_file(a.checkpoint, "checkpoint");
        require_file(a.data, "data file");
        const Checkpoint ck = load_checkpoint(a.checkpoint);
        Dataset data = load_wfm(a.data);
        if (a.max_samples && static_cast<std::size_t>(*a.max_samples) < data.size()) {
            data.maps.resize(static_cast<std::size_t>(*a.max_samples));
        }
        if (data.empty()) throw InputError("energy measurement needs at least one map");
        const Index steps = a.steps ? *a.steps : ck.network.config().time_steps;
        if (steps < 1) throw ConfigError("--T must be at least 1");
        const auto stats = measure_firing_rates(ck.network, to_tensor_dataset<float>(data), steps);
        report = estimate_network_energy(ck.network.config(), stats, steps, a.model.empty() ? "Wafer2Spike" : a.model);
    }
    print_energy_table(out, report);
    ensure_dir(a.out);
    auto csv = open_out(fs::path(a.out) / "energy.csv");
    write_energy_csv(csv, report);
}

void inspect_wfm(const Dataset& data, std::ostream& out) {
    out << "WFM1 dataset: " << data.size() << " maps\n";
    const auto counts = data.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        out << "  " << std::left << std::setw(10) << class_names()[c] << std::right << counts[c] << '\n';
    }
    std::map<std::pair<int, int>, std::size_t> grids;
    for (const auto& m : data.maps) ++grids[{m.height, m.width}];
    for (const auto& [hw, n] : grids) out << "  grid " << hw.first << "x" << hw.second << ": " << n << '\n';
}

void inspect_checkpoint(const Checkpoint& ck, std::ostream& out) {
    const auto& cfg = ck.network.config();
    out << "W2S1 checkpoint: epoch " << ck.epoch << ", T = " << cfg.time_steps << ", v_thr = " << cfg.v_thr
        << ", v_reset = " << cfg.v_reset << ", " << ck.network.parameter_count() << " parameters\n";
    for (const auto& d : cfg.describe()) {
        out << "  " << std::left << std::setw(8) << d.name << std::right << to_string(d.input_shape) << " -> "
            << to_string(d.neuron_shape);
        if (d.kind == LayerKind::Encoder || d.kind == LayerKind::SpikingConv) {
            out << "  k" << d.kernel_h << "x" << d.kernel_w << " s" << d.stride << " p" << d.padding;
        }
        out << '\n';
    }
}

void cmd_inspect(const std::string& path, std::ostream& out) {
    require_file(path, "file");
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    const std::string m(magic, 4);
    if (m == "WFM1") {
        inspect_wfm(load_wfm(path), out);
    } else if (m == "W2S1") {
        inspect_checkpoint(load_checkpoint(path), out);
    } else {
        throw FormatError("unrecognised file type (expected WFM1 or W2S1): " + path, 0);
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Wafer2Spike: spiking network for wafer-map defect classification", "w2s"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic WFM1 dataset");
    s->add_option("--per-class", synth.per_class, "maps per class")->required();
    s->add_option("--seed", synth.seed, "generator seed");
    s->add_option("--out", synth.out, "output .wfm path")->required();

    ImportArgs imp;
    auto* im = app.add_subcommand("import", "convert CSV rows to WFM1");
    im->add_option("--csv", imp.csv, "input CSV")->required();
    im->add_option("--out", imp.out, "output .wfm path")->required();
    im->add_flag("--resize", imp.resize, "resample every map to 36x36");

    AugmentArgs aug;
    auto* au = app.add_subcommand("augment", "grow minority classes with D4 symmetries");
    au->add_option("--data", aug.data, "input .wfm")->required();
    au->add_option("--out", aug.out, "output .wfm path")->required();
    au->add_option("--target", aug.targets, "Class=count (repeatable)")->required();
    au->add_option("--seed", aug.seed, "selection seed");
    au->add_flag("--allow-repeats", aug.allow_repeats, "reuse (template, transform) pairs when short");

    SplitArgs spl;
    auto* sp = app.add_subcommand("split", "partition a dataset into train/test or train/val/test");
    sp->add_option("--data", spl.data, "input .wfm")->required();
    sp->add_option("--ratios", spl.ratios, "e.g. 0.8,0.2 or 6:1:3");
    sp->add_option("--seed", spl.seed, "shuffle seed");
    sp->add_flag("--no-stratify", spl.no_stratify, "plain shuffle instead of per-class");
    sp->add_option("--out", spl.out, "output directory");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train from a JSON run config");
    t->add_option("--config", tr.config, "run config (JSON)")->required();
    t->add_option("--epochs", tr.epochs, "override train.epochs");
    t->add_option("--seed", tr.seed, "override train.seed");
    t->add_option("--lr", tr.lr, "override train.learning_rate");
    t->add_option("--batch-size", tr.batch, "override train.batch_size");
    t->add_option("--out", tr.out, "override output.dir");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
    e->add_option("--checkpoint", ev.checkpoint, "W2S1 checkpoint")->required();
    e->add_option("--data", ev.data, "input .wfm")->required();
    e->add_option("--split", ev.which, "all, train, val or test");
    e->add_option("--ratios", ev.ratios, "split ratios used to recover the part");
    e->add_option("--seed", ev.seed, "split seed");
    e->add_flag("--no-stratify", ev.no_stratify, "plain shuffle instead of per-class");
    e->add_option("--config", ev.config, "run config to check the architecture and split against");
    e->add_option("--batch-size", ev.batch, "inference batch size");
    e->add_option("--out", ev.out, "output directory");

    EnergyArgs en;
    auto* g = app.add_subcommand("energy", "estimate inference energy");
    g->add_option("--checkpoint", en.checkpoint, "W2S1 checkpoint");
    g->add_option("--data", en.data, "maps used to measure firing rates");
    g->add_option("--T", en.steps, "time steps (default: checkpoint T)");
    g->add_option("--flops", en.flops, "baseline mode: published FLOPs of a conventional network");
    g->add_option("--model", en.model, "model name for the report");
    g->add_option("--max-samples", en.max_samples, "use only the first N maps");
    g->add_option("--out", en.out, "output directory");

    std::string inspect_path;
    auto* in = app.add_subcommand("inspect", "summarise a .wfm or .w2s file");
    in->add_option("path", inspect_path, "file to inspect")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& pe) {
        err << "error: " << pe.what() << '\n';
        return kExitUsage;
    }

    try {
        if (s->parsed()) cmd_synth(synth, out);
        else if (im->parsed()) cmd_import(imp, out);
        else if (au->parsed()) cmd_augment(aug, out, err);
        else if (sp->parsed()) cmd_split(spl, out);
        else if (t->parsed()) cmd_train(tr, out);
        else if (e->parsed()) cmd_eval(ev, out);
        else if (g->parsed()) cmd_energy(en, out);
        else if (in->parsed()) cmd_inspect(inspect_path, out);
    } catch (const ConfigError& ce) {
        err << "error: " << ce.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace w2s::cli
