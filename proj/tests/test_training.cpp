#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "w2s/training.hpp"
#include "w2s/wafer.hpp"

using namespace w2s;

namespace {

NetworkConfig small_config(Index steps = 2) {
    NetworkConfig c;
    c.input_size = 8;
    c.encoder_channels = 3;
    c.encoder_kernel = 3;
    c.convs = {{4, 3, 2, 0}};
    c.fc_units = 9;
    c.time_steps = steps;
    return c;
}

Tensor<double> random_input(Index batch, Index size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Tensor<double> x({batch, 1, size, size});
    for (double& v : x.values()) v = d(rng);
    return x;
}

const TensorDataset<float>& ninety() {
    static const auto data = to_tensor_dataset<float>(generate_synthetic(10, 2024));
    return data;
}

}  // namespace

TEST_CASE("cross entropy") {
    SUBCASE("perfect prediction costs nothing") {
        Tensor<float> s({2, 9});
        s(0, 3) = 1000.0f;
        s(1, 8) = 1000.0f;
        const std::vector<int> y{3, 8};
        const auto ce = cross_entropy(s, y);
        CHECK(ce.loss == 0.0);
    }
    SUBCASE("uniform scores cost ln 9") {
        const Tensor<double> s({4, 9}, 0.37);
        const std::vector<int> y{0, 3, 5, 8};
        CHECK(cross_entropy(s, y).loss == doctest::Approx(std::log(9.0)).epsilon(1e-12));
        CHECK(cross_entropy(s, y).loss == doctest::Approx(2.19722).epsilon(1e-5));
    }
    SUBCASE("gradient rows sum to zero and match (p - onehot) / B") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n(0.0, 3.0);
        Tensor<double> s({5, 9});
        for (double& v : s.values()) v = n(rng);
        const std::vector<int> y{1, 0, 8, 4, 4};
        const auto ce = cross_entropy(s, y);
        CHECK(ce.loss >= 0.0);
        for (Index i = 0; i < 5; ++i) {
            double z = 0.0, row = 0.0;
            for (Index c = 0; c < 9; ++c) z += std::exp(s(i, c));
            for (Index c = 0; c < 9; ++c) {
                const double p = std::exp(s(i, c)) / z;
                const double expected = (p - (c == y[static_cast<std::size_t>(i)] ? 1.0 : 0.0)) / 5.0;
                CHECK(ce.grad_scores(i, c) == doctest::Approx(expected).epsilon(1e-12));
                row += ce.grad_scores(i, c);
            }
            CHECK(std::abs(row) < 1e-15);
        }
    }
    SUBCASE("bad labels") {
        const Tensor<float> s({2, 9});
        CHECK_THROWS_AS(cross_entropy(s, std::vector<int>{0, 9}), InputError);
        CHECK_THROWS_AS(cross_entropy(s, std::vector<int>{-1, 0}), InputError);
        CHECK_THROWS_AS(cross_entropy(s, std::vector<int>{0}), DimensionError);
    }
}

TEST_CASE("argmax prediction") {
    CHECK(predict_classes(Tensor<float>({1, 9})) == std::vector<int>{0});
    CHECK(predict_classes(Tensor<float>({2, 3}, {0, 2, 2, 5, 1, 5})) == std::vector<int>{1, 0});
    std::mt19937_64 rng(5);
    std::normal_distribution<float> n;
    Tensor<float> s({20, 9});
    for (float& v : s.values()) v = n(rng);
    Tensor<float> shifted = s;
    for (Index i = 0; i < 20; ++i)
        for (Index c = 0; c < 9; ++c) shifted(i, c) += static_cast<float>(i) - 7.0f;
    CHECK(predict_classes(s) == predict_classes(shifted));
}

TEST_CASE("stbp_backward special cases") {
    std::mt19937_64 rng(7);
    SUBCASE("zero cotangent gives zero gradients") {
        Network<double> net(small_config(), 1);
        const auto fwd = network_forward(random_input(3, 8, rng), net);
        const auto g = stbp_backward(fwd, Tensor<double>({3, 9}), net);
        for (const auto& t : g.tensors) CHECK(t.vec().isZero());
    }
    SUBCASE("silent network only trains its decoder") {
        auto cfg = small_config(1);
        Network<double> net(cfg, 2);
        net.encoder().bias = Tensor<double>({3}, -100.0);
        for (auto& c : net.convs()) c.bias = Tensor<double>(c.bias.shape(), -100.0);
        net.fc().bias = Tensor<double>({9}, -100.0);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        for (double& v : net.output().bias.values()) v = d(rng);
        const auto fwd = network_forward(random_input(2, 8, rng), net);
        for (const auto& tr : fwd.traces) CHECK(tr.spk.vec().isZero());
        const auto ce = cross_entropy(fwd.class_scores, std::vector<int>{2, 5});
        const auto g = stbp_backward(fwd, ce.grad_scores, net);
        const auto params = net.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            INFO(params[i].name);
            if (params[i].name.rfind("output.", 0) == 0) continue;
            CHECK(g.tensors[i].vec().isZero());
        }
        const std::size_t out_bias = params.size() - 2;
        CHECK(params[out_bias].name == "output.bias");
        CHECK(g.tensors[out_bias].vec().norm() > 0.0);
        CHECK(g.tensors[out_bias + 1].vec().norm() > 0.0);  // time weights see the bias-only scores
    }
}

TEST_CASE("optimizer") {
    auto cfg = small_config();
    SUBCASE("SGD hand step") {
        Network<float> net(cfg, 1);
        auto params = net.parameters();
        params[0].tensor->data()[0] = 1.0f;
        auto g = net.zero_gradients();
        g.tensors[0].data()[0] = 0.5f;
        Optimizer<float> opt({OptimizerKind::Sgd, 0.1});
        opt.step(net, g);
        CHECK(params[0].tensor->data()[0] == doctest::Approx(0.95f));
    }
    SUBCASE("SGD with zero gradients only clamps") {
        Network<float> net(cfg, 1);
        net.encoder().lif.w_scd.data()[0] = 1.3f;
        net.fc().lif.w_vd.data()[2] = -0.2f;
        const Network<float> before = net;
        Optimizer<float> opt({OptimizerKind::Sgd, 0.1});
        opt.step(net, net.zero_gradients());
        CHECK(net.encoder().lif.w_scd.data()[0] == 1.0f);
        CHECK(net.fc().lif.w_vd.data()[2] == 0.0f);
        CHECK(net.encoder().kernel == before.encoder().kernel);
        CHECK(net.fc().weight == before.fc().weight);
        CHECK(net.output().time_weights == before.output().time_weights);
    }
    SUBCASE("Adam first step moves every parameter by about lr") {
        Network<double> net(cfg, 1);
        const Network<double> before = net;
        auto g = net.zero_gradients();
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> mag(-6.0, 3.0);
        for (auto& t : g.tensors)
            for (double& v : t.values()) v = (rng() % 2 ? 1.0 : -1.0) * std::pow(10.0, mag(rng));
        Optimizer<double> opt({OptimizerKind::Adam, 1e-3});
        opt.step(net, g);
        const auto a = before.parameters();
        const auto b = net.parameters();
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (b[i].kind == ParamKind::Decay) continue;  // may be clamped
            for (Index k = 0; k < a[i]->size(); ++k) {
                const double step = b[i].tensor->data()[k] - a[i]->data()[k];
                CHECK(std::abs(step) == doctest::Approx(1e-3).epsilon(1e-2));
                CHECK(step * g.tensors[i].data()[k] < 0.0);
            }
        }
    }
    SUBCASE("decays stay in [0, 1] under aggressive updates") {
        Network<float> net(cfg, 1);
        Optimizer<float> opt({OptimizerKind::Sgd, 5.0});
        std::mt19937_64 rng(10);
        std::normal_distribution<float> n(0.0f, 1.0f);
        for (int s = 0; s < 25; ++s) {
            auto g = net.zero_gradients();
            for (auto& t : g.tensors)
                for (float& v : t.values()) v = n(rng);
            opt.step(net, g);
            for (auto* lif : net.lif_params()) {
                CHECK(lif->w_scd.vec().minCoeff() >= 0.0f);
                CHECK(lif->w_scd.vec().maxCoeff() <= 1.0f);
                CHECK(lif->w_vd.vec().minCoeff() >= 0.0f);
                CHECK(lif->w_vd.vec().maxCoeff() <= 1.0f);
            }
        }
    }
    SUBCASE("non-finite gradient in checked mode") {
        Network<float> net(cfg, 1);
        auto g = net.zero_gradients();
        g.tensors[3].data()[0] = std::nanf("");
        Optimizer<float> opt;
        CHECK_THROWS_AS(opt.step(net, g), NumericError);
    }
}

TEST_CASE("epoch shuffles are seeded permutations") {
    for (Index epoch : {1, 2, 7}) {
        const auto p = epoch_permutation(1000, 42, epoch);
        CHECK(std::set<Index>(p.begin(), p.end()).size() == 1000);
        CHECK(*std::min_element(p.begin(), p.end()) == 0);
        CHECK(*std::max_element(p.begin(), p.end()) == 999);
        CHECK(p == epoch_permutation(1000, 42, epoch));
    }
    CHECK(epoch_permutation(1000, 42, 1) != epoch_permutation(1000, 42, 2));
    CHECK(epoch_permutation(1000, 42, 1) != epoch_permutation(1000, 43, 1));
}

TEST_CASE("training on 90 synthetic maps lowers the loss within 5 epochs") {
    Network<float> net(NetworkConfig{}, 3);
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 8;
    const auto history = train(ninety(), net, tc);
    REQUIRE(history.size() == 5);
    CHECK(history[4].loss < history[0].loss);
    for (const auto& r : history) {
        CHECK(r.loss >= 0.0);
        CHECK(r.n_samples == 90);
        CHECK(r.n_classes == 9);
        Index seen = 0;
        for (Index c : r.per_class_total) seen += c;
        CHECK(seen == 90);
    }
}

TEST_CASE("epoch-1 loss is bit-identical across fresh runs") {
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 99;
    Network<float> a(NetworkConfig{}, 12), b(NetworkConfig{}, 12);
    const double la = train(ninety(), a, tc)[0].loss;
    const double lb = train(ninety(), b, tc)[0].loss;
    CHECK(std::memcmp(&la, &lb, sizeof la) == 0);
    CHECK(a.fc().weight == b.fc().weight);
}

TEST_CASE("evaluation") {
    SUBCASE("zero network predicts class 0 everywhere") {
        const auto net = Network<float>::zeros(NetworkConfig{});
        const auto ev = evaluate(ninety(), net);
        for (int p : ev.predictions) CHECK(p == 0);
        CHECK(ev.metrics.overall_accuracy == doctest::Approx(10.0 / 90.0));
    }
    SUBCASE("evaluation does not touch the parameters") {
        const Network<float> net(NetworkConfig{}, 4);
        const Network<float> copy = net;
        evaluate(ninety(), net, 17);
        const auto a = net.parameters();
        const auto b = copy.parameters();
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
    }
    SUBCASE("empty set is an error") {
        const Network<float> net(NetworkConfig{}, 4);
        const TensorDataset<float> empty{};
        CHECK_THROWS_AS(evaluate(empty, net), InputError);
    }
}
