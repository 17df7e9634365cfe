// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "w2s/cli.hpp"
#include "w2s/energy.hpp"
#include "w2s/metrics.hpp"
#include "w2s/training.hpp"
#include "w2s/wafer.hpp"

using namespace w2s;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

Outcome energy_rows() {
    struct Row {
        const char* model;
        double count;
        bool spiking;
        double published_mj;
    };
    const Row rows[] = {{"CNN", 0.2391e9, false, 2.9884},
                        {"MC32+MLP", 0.0005e9, false, 0.0062},
                        {"DMC1", 0.4184e9, false, 5.2299},
                        {"Wafer2Spike-2C", 3.1391e9, true, 0.2417},
                        {"Wafer2Spike-4C", 21.9972e9, true, 1.6938}};
    bool pass = true;
    std::ostringstream d;
    d << std::setprecision(6);
    for (const auto& r : rows) {
        const double mj = r.spiking ? power_snn_mj(r.count) : power_dnn_mj(r.count);
        const double err = rel_err(mj, r.published_mj);
        const bool ok = err <= 1e-3;
        pass = pass && ok;
        d << r.model << " " << mj << " vs " << r.published_mj << " (" << err * 100 << "%" << (ok ? "" : " > 0.1%")
          << "); ";
    }
    return {pass, d.str()};
}

Outcome encoder_geometry() {
    const NetworkConfig cfg;
    Tensor<float> x({1, 1, 36, 36});
    Tensor<float> k({cfg.encoder_channels, 1, cfg.encoder_kernel, cfg.encoder_kernel});
    Tensor<float> b({cfg.encoder_channels});
    const Shape got = conv2d(x, k, b, 1, 0).shape();
    const Shape described = cfg.describe()[0].neuron_shape;
    const bool pass = got == Shape{1, 64, 30, 30} && described == Shape{64, 30, 30};
    return {pass, "encoder output " + to_string(got) + ", described " + to_string(described)};
}

Outcome gradient_check() {
    NetworkConfig c;
    c.input_size = 6;
    c.encoder_channels = 4;
    c.encoder_kernel = 3;
    c.convs = {{4, 3, 1, 0}};
    c.fc_units = 8;
    c.classes = 4;  // FC must be at least as wide as the class count
    c.time_steps = 2;
    const SurrogateSpec spec{1.0, SurrogateKind::Sigmoid};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> w(-1.0, 1.0), decay(0.2, 0.9), tw(0.3, 1.0), pixel(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, 3);
    const double h = 1e-6;
    long checked = 0, failed = 0;
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        Network<double> net(c, static_cast<std::uint64_t>(draw));
        for (auto& p : net.parameters()) {
            for (double& v : p.tensor->values()) {
                switch (p.kind) {
                    case ParamKind::Weight: v = w(rng); break;
                    case ParamKind::Bias: v = 0.5 * w(rng); break;
                    case ParamKind::Decay: v = decay(rng); break;
                    case ParamKind::TimeWeight: v = tw(rng); break;
                }
            }
        }
        net.sync_constants();
        Tensor<double> x({2, 1, 6, 6});
        for (double& v : x.values()) v = pixel(rng);
        const std::vector<int> y{label(rng), label(rng)};
        auto loss = [&] {
            return cross_entropy(network_forward(x, net, ForwardOptions<double>{spec, false}).class_scores, y).loss;
        };
        const auto fwd = network_forward(x, net, ForwardOptions<double>{spec, false});
        const auto grads = stbp_backward(fwd, cross_entropy(fwd.class_scores, y).grad_scores, net, spec);
        auto params = net.parameters();
        for (std::size_t p = 0; p < params.size(); ++p) {
            for (Index i = 0; i < params[p].tensor->size(); ++i) {
                double& v = params[p].tensor->data()[i];
                const double saved = v;
                v = saved + h;
                net.sync_constants();
                const double up = loss();
                v = saved - h;
                net.sync_constants();
                const double down = loss();
                v = saved;
                net.sync_constants();
                const double fd = (up - down) / (2 * h);
                const double g = grads.tensors[p].data()[i];
                const double tol = 1e-3 * std::max(std::abs(g), std::abs(fd)) + 1e-6;
                worst = std::max(worst, std::abs(g - fd) / tol);
                if (std::abs(g - fd) > tol) ++failed;
                ++checked;
            }
        }
    }
    std::ostringstream d;
    d << checked << " entries over 20 draws, " << failed << " outside tolerance, worst error/tolerance " << worst;
    return {failed == 0, d.str()};
}

Outcome overfit() {
    const auto data = to_tensor_dataset<float>(generate_synthetic(10, 1));
    Network<float> net(NetworkConfig{}, 3);
    TrainConfig tc;
    tc.epochs = 200;
    tc.seed = 5;
    const EpochCallback<float> stop_at_full = [](const LossReport& r, const Network<float>&) {
        return r.train_accuracy < 1.0;
    };
    const auto history = train(data, net, tc, stop_at_full);
    const auto& last = history.back();
    const bool decreased = history.size() >= 5 && history[4].loss < history[0].loss;
    std::ostringstream d;
    d << "train accuracy " << last.train_accuracy << " at epoch " << last.epoch << "; loss epoch 1 " << history[0].loss
      << ", epoch 5 " << (history.size() >= 5 ? history[4].loss : NAN);
    return {last.train_accuracy == 1.0 && decreased, d.str()};
}

Outcome generalization() {
    const auto train_set = to_tensor_dataset<float>(generate_synthetic(500, 11));
    const auto held_out = to_tensor_dataset<float>(generate_synthetic(100, 12));
    Network<float> net(NetworkConfig{}, 1);
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 1;
    const auto history = train(train_set, net, tc);
    const auto ev = evaluate(held_out, net);
    const double acc = ev.metrics.overall_accuracy.value_or(0.0);
    std::ostringstream d;
    d << train_set.size() << " train / " << held_out.size() << " held-out maps, " << tc.epochs
      << " epochs: held-out accuracy " << acc << " (train " << history.back().train_accuracy << ")";
    return {acc >= 0.9, d.str()};
}

Outcome lif_trace() {
    const auto p = LifParams<double>::uniform({1}, 0.5, 0.5, 1.0, 0.0);
    const Tensor<double> psp({1, 1}, {0.8});
    const auto s1 = lif_step(LifState<double>::zeros({1, 1}), psp, p);
    const auto s2 = lif_step(s1, psp, p);
    const bool pass = s1.spk(0, 0) == 0.0 && s1.v(0, 0) == 0.8 && s2.spk(0, 0) == 1.0 && s2.v(0, 0) == 0.0;
    std::ostringstream d;
    d << "step 1 v=" << s1.v(0, 0) << " spk=" << s1.spk(0, 0) << "; step 2 spk=" << s2.spk(0, 0)
      << " v=" << s2.v(0, 0);
    return {pass, d.str()};
}

Outcome augmentation() {
    Dataset d = generate_synthetic(std::vector<std::size_t>{20, 0, 12, 0, 0, 0, 0, 0, 0}, 3);
    const Dataset original = d;
    const auto r = augment_minority(d, {{{ClassLabel::Donut, 96}}, 5, false});
    bool originals = true, inverses = true;
    for (std::size_t i = 0; i < original.size(); ++i) originals = originals && r.data.maps[i].same_grid(original.maps[i]);
    for (std::size_t i = original.size(); i < r.data.size(); ++i) {
        const auto& m = r.data.maps[i];
        inverses = inverses && m.source_index >= 0 &&
                   apply_transform(m, inverse(m.transform)).same_grid(original.maps[static_cast<std::size_t>(m.source_index)]);
    }
    const auto donuts = r.data.class_counts()[2];
    std::ostringstream s;
    s << "Donut " << donuts << " maps, originals untouched " << originals << ", inverses exact " << inverses;
    return {donuts == 96 && originals && inverses && r.data.size() == 20 + 96, s.str()};
}

Outcome split_arithmetic() {
    const auto sizes = split_sizes(172950, std::vector<double>{0.8, 0.2});
    bool pass = sizes == std::vector<std::size_t>{138360, 34590};
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> label(0, 8);
    int checked = 0;
    for (const auto& ratios : std::vector<std::vector<double>>{{0.8, 0.2}, {0.7, 0.3}, {0.6, 0.1, 0.3}, {0.8, 0.1, 0.1}}) {
        for (std::size_t n : {1u, 37u, 500u}) {
            Dataset d;
            for (std::size_t i = 0; i < n; ++i) {
                WaferMap m(2, 2, label_from_int(label(rng)));
                m.source_index = static_cast<std::int64_t>(i);
                d.maps.push_back(m);
            }
            for (bool stratified : {true, false}) {
                std::multiset<std::int64_t> seen;
                for (const auto& part : split(d, {ratios, n, stratified}))
                    for (const auto& m : part.maps) seen.insert(m.source_index);
                pass = pass && seen.size() == n && std::set<std::int64_t>(seen.begin(), seen.end()).size() == n;
                ++checked;
            }
        }
    }
    std::ostringstream s;
    s << "172950 at 8:2 -> " << sizes[0] << "/" << sizes[1] << "; partition held on " << checked << " splits";
    return {pass, s.str()};
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "w2s_acceptance";
    fs::create_directories(dir);
    std::ostringstream sink;
    auto synth = [&](const std::string& name) {
        const auto path = (dir / name).string();
        cli::run({"synth", "--per-class", "10", "--seed", "42", "--out", path}, sink, sink);
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const bool files = synth("a.wfm") == synth("b.wfm");
    fs::remove_all(dir);

    const auto data = to_tensor_dataset<float>(generate_synthetic(10, 42));
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 4;
    Network<float> a(NetworkConfig{}, 9), b(NetworkConfig{}, 9);
    const double la = train(data, a, tc)[0].loss, lb = train(data, b, tc)[0].loss;
    const bool loss = std::memcmp(&la, &lb, sizeof la) == 0;
    std::ostringstream d;
    d << std::setprecision(17) << "synth files identical " << files << "; epoch-1 loss " << la << " vs " << lb;
    return {files && loss, d.str()};
}

Outcome metrics_oracle() {
    const auto r = per_class_stats(ConfusionMatrix::from_rows({{3, 1}, {2, 4}}));
    const auto& c0 = r.per_class[0];
    bool pass = std::abs(*c0.recall - 0.75) < 1e-12 && std::abs(*c0.precision - 0.6) < 1e-12 &&
                std::abs(*c0.f1 - 2.0 * 0.45 / 1.35) < 1e-12;
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> count(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 8;
        ConfusionMatrix cm(n), moved(n);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) moved(perm[i], perm[j]) = cm(i, j) = count(rng);
        const auto a = per_class_stats(cm), b = per_class_stats(moved);
        for (int i = 0; i < n; ++i) {
            const auto &x = a.per_class[static_cast<std::size_t>(i)], &y = b.per_class[static_cast<std::size_t>(perm[i])];
            pass = pass && x.recall == y.recall && x.precision == y.precision && x.f1 == y.f1;
        }
    }
    std::ostringstream d;
    d << "recall " << *c0.recall << ", precision " << *c0.precision << ", f1 " << *c0.f1
      << "; relabeling symmetry on 100 random matrices";
    return {pass, d.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"energy conversion", energy_rows},   {"encoder geometry", encoder_geometry},
        {"gradient check", gradient_check},   {"optimization", overfit},
        {"generalization", generalization},   {"LIF trace", lif_trace},
        {"augmentation", augmentation},       {"split arithmetic", split_arithmetic},
        {"determinism", determinism},         {"metrics oracle", metrics_oracle}};
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): "
                  << o.detail << " [" << std::fixed << std::setprecision(1) << secs << " s]" << std::defaultfloat
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
