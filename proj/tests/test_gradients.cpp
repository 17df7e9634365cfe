#include <doctest.h>

#include <random>

#include "w2s/training.hpp"

using namespace w2s;

namespace {

NetworkConfig tiny_config() {
    NetworkConfig c;
    c.input_size = 6;
    c.encoder_channels = 4;
    c.encoder_kernel = 3;
    c.convs = {{4, 3, 1, 0}};
    c.fc_units = 8;
    c.classes = 4;
    c.time_steps = 2;
    return c;
}

// Pushes every parameter away from the clamp boundaries and scales weights so
// the sigmoid units sit in their sensitive range.
void randomize(Network<double>& net, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> w(-1.0, 1.0), decay(0.2, 0.9), tw(0.3, 1.0);
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
}

double loss_of(const Network<double>& net, const Tensor<double>& x, const std::vector<int>& y,
               const SurrogateSpec& spec) {
    const auto fwd = network_forward(x, net, ForwardOptions<double>{spec, false});
    return cross_entropy(fwd.class_scores, y).loss;
}

}  // namespace

TEST_CASE("smooth-mode STBP gradients match central differences on every parameter") {
    const SurrogateSpec spec{1.0, SurrogateKind::Sigmoid};
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> pixel(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, 3);
    const double h = 1e-6;
    int checked = 0;
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        Network<double> net(tiny_config(), static_cast<std::uint64_t>(draw));
        randomize(net, rng);
        Tensor<double> x({2, 1, 6, 6});
        for (double& v : x.values()) v = pixel(rng);
        const std::vector<int> y{label(rng), label(rng)};

        const auto fwd = network_forward(x, net, ForwardOptions<double>{spec, false});
        const auto ce = cross_entropy(fwd.class_scores, y);
        const auto grads = stbp_backward(fwd, ce.grad_scores, net, spec);

        auto params = net.parameters();
        REQUIRE(grads.tensors.size() == params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            REQUIRE(grads.tensors[p].shape() == params[p].tensor->shape());
            for (Index i = 0; i < params[p].tensor->size(); ++i) {
                double& v = params[p].tensor->data()[i];
                const double saved = v;
                v = saved + h;
                net.sync_constants();
                const double up = loss_of(net, x, y, spec);
                v = saved - h;
                net.sync_constants();
                const double down = loss_of(net, x, y, spec);
                v = saved;
                net.sync_constants();
                const double fd = (up - down) / (2 * h);
                const double g = grads.tensors[p].data()[i];
                const double err = std::abs(g - fd);
                const double tol = 1e-3 * std::max(std::abs(g), std::abs(fd)) + 1e-6;
                worst = std::max(worst, err / tol);
                if (err > tol) {
                    FAIL_CHECK("draw " << draw << " " << params[p].name << "[" << i << "]: stbp " << g << " fd " << fd);
                }
                ++checked;
            }
        }
    }
    MESSAGE(checked << " gradient entries checked, worst error/tolerance " << worst);
}
