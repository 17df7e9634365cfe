#include <doctest.h>

#include <random>

#include "w2s/lif.hpp"

using namespace w2s;

namespace {

LifParams<double> hand_params() { return LifParams<double>::uniform({1}, 0.5, 0.5, 1.0, 0.0); }

LifState<double> scalar_state(double isc, double v, double spk) {
    return {Tensor<double>({1, 1}, {isc}), Tensor<double>({1, 1}, {v}), Tensor<double>({1, 1}, {spk})};
}

}  // namespace

TEST_CASE("quiescent neuron stays at rest") {
    const auto p = LifParams<float>::uniform({3}, 0.7f, 0.8f);
    const auto s = lif_step(LifState<float>::zeros({2, 3}), Tensor<float>({2, 3}), p);
    CHECK(s.isc.vec().isZero());
    CHECK(s.v.vec().isZero());
    CHECK(s.spk.vec().isZero());
}

TEST_CASE("two-step hand trace spikes at step 2 and resets to zero") {
    const auto p = LifParams<float>::uniform({1}, 0.5f, 0.5f, 1.0f, 0.0f);
    const Tensor<float> psp({1, 1}, {0.8f});
    LifStepCache<float> c1, c2;
    const auto s1 = lif_step(LifState<float>::zeros({1, 1}), psp, p, {}, &c1);
    CHECK(s1.isc(0, 0) == 0.8f);
    CHECK(s1.v(0, 0) == 0.8f);
    CHECK(s1.spk(0, 0) == 0.0f);
    const auto s2 = lif_step(s1, psp, p, {}, &c2);
    CHECK(s2.isc(0, 0) == doctest::Approx(1.2).epsilon(1e-6));
    CHECK(c2.v_pre(0, 0) == doctest::Approx(1.6).epsilon(1e-6));
    CHECK(s2.spk(0, 0) == 1.0f);
    CHECK(s2.v(0, 0) == 0.0f);
}

TEST_CASE("threshold is a strict inequality") {
    const auto p = LifParams<double>::uniform({1}, 0.5, 0.5, 1.0, 0.0);
    const auto s = lif_step(LifState<double>::zeros({1, 1}), Tensor<double>({1, 1}, {1.0}), p);
    CHECK(s.spk(0, 0) == 0.0);
    CHECK(s.v(0, 0) == 1.0);
}

TEST_CASE("shape errors") {
    const auto p = LifParams<float>::uniform({3}, 0.5f, 0.5f);
    CHECK_THROWS_AS(lif_step(LifState<float>::zeros({2, 3}), Tensor<float>({2, 4}), p), DimensionError);
    CHECK_THROWS_AS(lif_step(LifState<float>::zeros({2, 2}), Tensor<float>({2, 3}), p), DimensionError);
}

TEST_CASE("surrogate derivative window") {
    const auto p = LifParams<double>::uniform({3}, 0.5, 0.5, 1.0, 0.0);
    const Tensor<double> v({1, 3}, {1.0, 1.6, 0.8});
    const auto g1 = surrogate_derivative(v, p, SurrogateSpec{1.0});
    CHECK(g1(0, 0) == 1.0);
    CHECK(g1(0, 1) == 0.0);
    CHECK(g1(0, 2) == 1.0);
    const auto g2 = surrogate_derivative(v, p, SurrogateSpec{0.5});
    CHECK(g2(0, 2) == 2.0);
    CHECK(g2(0, 0) == 2.0);
    CHECK_THROWS_AS(surrogate_derivative(v, p, SurrogateSpec{0.0}), InputError);
}

TEST_CASE("lif_step_backward") {
    const auto p = hand_params();
    SUBCASE("zero cotangent") {
        LifStepCache<double> c;
        lif_step(scalar_state(0.3, 0.2, 0.0), Tensor<double>({1, 1}, {0.5}), p, {}, &c);
        const auto g = lif_step_backward(LifState<double>::zeros({1, 1}), c, p);
        CHECK(g.grad_psp(0, 0) == 0.0);
        CHECK(g.grad_prev_isc(0, 0) == 0.0);
        CHECK(g.grad_prev_v(0, 0) == 0.0);
        CHECK(g.grad_w_scd(0) == 0.0);
        CHECK(g.grad_w_vd(0) == 0.0);
    }
    SUBCASE("hand trace step 2 lies outside the window") {
        const Tensor<double> psp({1, 1}, {0.8});
        const auto s1 = lif_step(LifState<double>::zeros({1, 1}), psp, p);
        LifStepCache<double> c;
        lif_step(s1, psp, p, {}, &c);
        const auto g = lif_step_backward(scalar_state(0.0, 0.0, 1.0), c, p, SurrogateSpec{1.0});
        CHECK(g.grad_psp(0, 0) == 0.0);
        // a wider window lets it through: d spk/d v_pre = 1/2 and d v_pre/d psp = 1
        const auto g3 = lif_step_backward(scalar_state(0.0, 0.0, 1.0), c, p, SurrogateSpec{2.0});
        CHECK(g3.grad_psp(0, 0) == doctest::Approx(0.5));
    }
    SUBCASE("missing cache") {
        CHECK_THROWS_AS(lif_step_backward(LifState<double>::zeros({1, 1}), LifStepCache<double>{}, p), ContractError);
    }
}

TEST_CASE("smooth-mode lif_step_backward matches finite differences") {
    // Independent forward with a sigmoid spike of slope 4/width.
    const SurrogateSpec spec{0.8, SurrogateKind::Sigmoid};
    const double k = 4.0 / spec.width;
    auto forward = [&](double a, double b, double isc0, double v0, double psp, double thr, double reset) {
        const double isc = a * isc0 + psp;
        const double vp = b * v0 + isc;
        const double s = 1.0 / (1.0 + std::exp(-k * (vp - thr)));
        const double v = reset * s + vp * (1.0 - s);
        return std::array<double, 3>{isc, v, s};
    };
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0), dec(0.1, 0.9);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = dec(rng), b = dec(rng), isc0 = u(rng), v0 = u(rng) + 0.5, psp = u(rng) + 0.5;
        const double gi = u(rng), gv = u(rng), gs = u(rng);
        const auto params = LifParams<double>::uniform({1}, a, b, 1.0, -0.2);
        LifStepCache<double> c;
        const auto s = lif_step(scalar_state(isc0, v0, 0.0), Tensor<double>({1, 1}, {psp}), params, spec, &c);
        const auto ref = forward(a, b, isc0, v0, psp, 1.0, -0.2);
        CHECK(s.isc(0, 0) == doctest::Approx(ref[0]).epsilon(1e-12));
        CHECK(s.v(0, 0) == doctest::Approx(ref[1]).epsilon(1e-12));
        CHECK(s.spk(0, 0) == doctest::Approx(ref[2]).epsilon(1e-12));

        const auto g = lif_step_backward(scalar_state(gi, gv, gs), c, params, spec);
        auto obj = [&](double da, double db, double di, double dv, double dp) {
            const auto r = forward(a + da, b + db, isc0 + di, v0 + dv, psp + dp, 1.0, -0.2);
            return gi * r[0] + gv * r[1] + gs * r[2];
        };
        const double h = 1e-6;
        auto fd = [&](int which) {
            double d[5] = {0, 0, 0, 0, 0};
            d[which] = h;
            const double up = obj(d[0], d[1], d[2], d[3], d[4]);
            d[which] = -h;
            const double down = obj(d[0], d[1], d[2], d[3], d[4]);
            return (up - down) / (2 * h);
        };
        CHECK(g.grad_w_scd(0) == doctest::Approx(fd(0)).epsilon(1e-6));
        CHECK(g.grad_w_vd(0) == doctest::Approx(fd(1)).epsilon(1e-6));
        CHECK(g.grad_prev_isc(0, 0) == doctest::Approx(fd(2)).epsilon(1e-6));
        CHECK(g.grad_prev_v(0, 0) == doctest::Approx(fd(3)).epsilon(1e-6));
        CHECK(g.grad_psp(0, 0) == doctest::Approx(fd(4)).epsilon(1e-6));
    }
}

TEST_CASE("state invariants over many steps") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<float> u(-1.5f, 2.5f);
    const auto p = LifParams<float>::uniform({4, 5}, 0.7f, 0.8f, 1.0f, -0.1f);
    auto state = LifState<float>::zeros({3, 4, 5});
    for (int t = 0; t < 40; ++t) {
        Tensor<float> psp({3, 4, 5});
        for (float& x : psp.values()) x = u(rng);
        const auto again = lif_step(state, psp, p);
        state = lif_step(state, psp, p);
        CHECK(again.v == state.v);  // bit-identical on identical inputs
        CHECK(state.v.shape() == Shape{3, 4, 5});
        for (Index i = 0; i < state.spk.size(); ++i) {
            const float s = state.spk.data()[i];
            CHECK((s == 0.0f || s == 1.0f));
            if (s == 1.0f) CHECK(state.v.data()[i] == -0.1f);
        }
    }
}

TEST_CASE("decay without input never grows the state") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-0.9, 0.9), dec(0.0, 1.0);
    LifParams<double> p{Tensor<double>({16}), Tensor<double>({16}), 1.0, 0.0};
    for (double& x : p.w_scd.values()) x = dec(rng);
    for (double& x : p.w_vd.values()) x = dec(rng);
    const Tensor<double> zero({1, 16});
    SUBCASE("synaptic current") {
        LifState<double> s = LifState<double>::zeros({1, 16});
        // non-positive current and potential keep v_pre below threshold
        for (double& x : s.isc.values()) x = -std::abs(u(rng));
        for (double& x : s.v.values()) x = -1.0;
        for (int t = 0; t < 20; ++t) {
            const auto n = lif_step(s, zero, p);
            CHECK(n.spk.vec().isZero());
            CHECK((n.isc.vec().array().abs() <= s.isc.vec().array().abs()).all());
            s = n;
        }
    }
    SUBCASE("membrane potential once the current has drained") {
        LifState<double> s = LifState<double>::zeros({1, 16});
        for (double& x : s.v.values()) x = u(rng);
        for (int t = 0; t < 20; ++t) {
            const auto n = lif_step(s, zero, p);
            CHECK(n.spk.vec().isZero());
            CHECK((n.v.vec().array().abs() <= s.v.vec().array().abs()).all());
            s = n;
        }
    }
}
