#pragma once

#include <cmath>

#include "w2s/tensor.hpp"

namespace w2s {

/// How the spike nonlinearity is differentiated.
///
/// Rectangular: forward is the hard threshold v_pre > v_thr; backward uses a
/// box of height 1/width centred on v_thr.
/// Sigmoid: forward and backward both use sigmoid(k (v_pre - v_thr)) with
/// k = 4/width, whose peak slope equals the rectangular surrogate height.
/// This fully differentiable mode exists so gradients can be checked against
/// finite differences.
enum class SurrogateKind { Rectangular, Sigmoid };

struct SurrogateSpec {
    double width = 1.0;
    SurrogateKind kind = SurrogateKind::Rectangular;

    double sigmoid_slope() const { return 4.0 / width; }
    bool smooth() const { return kind == SurrogateKind::Sigmoid; }
    void validate() const {
        if (!(width > 0.0)) throw InputError("surrogate width must be positive");
    }
};

/// Learnable per-neuron decays plus the global threshold/reset constants.
template <typename Scalar>
struct LifParams {
    Tensor<Scalar> w_scd;  // synaptic-current decay, neuron shape
    Tensor<Scalar> w_vd;   // membrane-voltage decay, neuron shape
    Scalar v_thr = Scalar(1);
    Scalar v_reset = Scalar(0);

    static LifParams uniform(const Shape& neuron_shape, Scalar scd, Scalar vd, Scalar thr = Scalar(1),
                             Scalar reset = Scalar(0)) {
        return {Tensor<Scalar>(neuron_shape, scd), Tensor<Scalar>(neuron_shape, vd), thr, reset};
    }

    Index neurons() const { return w_scd.size(); }

    void validate() const {
        if (w_scd.shape() != w_vd.shape()) {
            throw DimensionError("w_scd " + to_string(w_scd.shape()) + " and w_vd " + to_string(w_vd.shape()) +
                                 " must share the neuron shape");
        }
        if (!(v_thr > v_reset)) throw InputError("v_thr must exceed v_reset");
    }
};

/// State of one layer, batch-major: each tensor is (B, neuron shape...).
template <typename Scalar>
struct LifState {
    Tensor<Scalar> isc;
    Tensor<Scalar> v;
    Tensor<Scalar> spk;

    static LifState zeros(const Shape& batched_shape) {
        return {Tensor<Scalar>(batched_shape), Tensor<Scalar>(batched_shape), Tensor<Scalar>(batched_shape)};
    }
};

namespace detail {

template <typename Scalar>
Index lif_batch(const Tensor<Scalar>& batched, const LifParams<Scalar>& params, const char* what) {
    const Index n = params.neurons();
    if (n == 0 || batched.size() % n != 0 || batched.size() == 0) {
        throw DimensionError(std::string(what) + " shape " + to_string(batched.shape()) +
                             " is not a batch of neuron shape " + to_string(params.w_scd.shape()));
    }
    return batched.size() / n;
}

template <typename Scalar>
Scalar spike_value(Scalar v_pre, Scalar v_thr, const SurrogateSpec& spec) {
    if (spec.smooth()) {
        const Scalar k = static_cast<Scalar>(spec.sigmoid_slope());
        return Scalar(1) / (Scalar(1) + std::exp(-k * (v_pre - v_thr)));
    }
    return v_pre > v_thr ? Scalar(1) : Scalar(0);
}

template <typename Scalar>
Scalar spike_slope(Scalar v_pre, Scalar spk, Scalar v_thr, const SurrogateSpec& spec) {
    if (spec.smooth()) {
        return static_cast<Scalar>(spec.sigmoid_slope()) * spk * (Scalar(1) - spk);
    }
    const Scalar half = static_cast<Scalar>(spec.width / 2);
    return std::abs(v_pre - v_thr) < half ? static_cast<Scalar>(1.0 / spec.width) : Scalar(0);
}

// One LIF update over `batch` rows of `neurons` entries. Pointers may alias
// across calls but not within one call.
template <typename Scalar>
void lif_update(Index batch, Index neurons, const Scalar* prev_isc, const Scalar* prev_v, const Scalar* psp,
                const LifParams<Scalar>& params, const SurrogateSpec& spec, Scalar* isc, Scalar* v_pre, Scalar* v,
                Scalar* spk) {
    const Scalar* a = params.w_scd.data();
    const Scalar* b = params.w_vd.data();
    const Scalar thr = params.v_thr;
    const Scalar reset = params.v_reset;
    for (Index n = 0; n < batch; ++n) {
        const Index base = n * neurons;
        for (Index i = 0; i < neurons; ++i) {
            const Index e = base + i;
            const Scalar current = a[i] * prev_isc[e] + psp[e];
            const Scalar pre = b[i] * prev_v[e] + current;
            const Scalar s = spike_value(pre, thr, spec);
            isc[e] = current;
            v_pre[e] = pre;
            spk[e] = s;
            if (spec.smooth()) {
                v[e] = reset * s + pre * (Scalar(1) - s);
            } else {
                v[e] = s != Scalar(0) ? reset : pre;
            }
        }
    }
}

// Reverse of lif_update. Reads cotangents on (isc, v, spk) of this step and
// writes the cotangent on psp and on the previous (isc, v). Decay gradients are
// accumulated, summed over the batch.
template <typename Scalar>
void lif_update_backward(Index batch, Index neurons, const Scalar* g_isc, const Scalar* g_v, const Scalar* g_spk,
                         const Scalar* prev_isc, const Scalar* prev_v, const Scalar* v_pre, const Scalar* spk,
                         const LifParams<Scalar>& params, const SurrogateSpec& spec, Scalar* g_psp,
                         Scalar* g_prev_isc, Scalar* g_prev_v, Scalar* g_w_scd, Scalar* g_w_vd) {
    const Scalar* a = params.w_scd.data();
    const Scalar* b = params.w_vd.data();
    const Scalar thr = params.v_thr;
    const Scalar reset = params.v_reset;
    for (Index n = 0; n < batch; ++n) {
        const Index base = n * neurons;
        for (Index i = 0; i < neurons; ++i) {
            const Index e = base + i;
            const Scalar s = spk[e];
            const Scalar slope = spike_slope(v_pre[e], s, thr, spec);
            // v = reset*s + v_pre*(1-s), with s = s(v_pre)
            const Scalar gs = g_spk[e] + g_v[e] * (reset - v_pre[e]);
            const Scalar g_pre = g_v[e] * (Scalar(1) - s) + gs * slope;
            const Scalar g_current = g_isc[e] + g_pre;
            g_psp[e] = g_current;
            g_prev_isc[e] = a[i] * g_current;
            g_prev_v[e] = b[i] * g_pre;
            g_w_scd[i] += g_current * prev_isc[e];
            g_w_vd[i] += g_pre * prev_v[e];
        }
    }
}

}  // namespace detail

/// Rectangular surrogate for d spk / d v_pre: 1/width inside the open window
/// |v_pre - v_thr| < width/2, zero outside.
template <typename Scalar>
Tensor<Scalar> surrogate_derivative(const Tensor<Scalar>& v_pre, const LifParams<Scalar>& params,
                                    const SurrogateSpec& spec) {
    spec.validate();
    Tensor<Scalar> out(v_pre.shape());
    const Scalar thr = params.v_thr;
    const SurrogateSpec rect{spec.width, SurrogateKind::Rectangular};
    for (Index i = 0; i < v_pre.size(); ++i) {
        out.data()[i] = detail::spike_slope(v_pre.data()[i], Scalar(0), thr, rect);
    }
    return out;
}

/// Values recorded by lif_step for the reverse pass.
template <typename Scalar>
struct LifStepCache {
    Tensor<Scalar> prev_isc;
    Tensor<Scalar> prev_v;
    Tensor<Scalar> v_pre;
    Tensor<Scalar> spk;
};

/// One current-based LIF update:
///   isc = w_scd * isc_prev + psp
///   v_pre = w_vd * v_prev + isc
///   spk = [v_pre > v_thr]         (strict)
///   v = spk ? v_reset : v_pre     (hard reset)
/// psp and the state are batched; decays broadcast over the batch.
template <typename Scalar>
LifState<Scalar> lif_step(const LifState<Scalar>& prev, const Tensor<Scalar>& psp, const LifParams<Scalar>& params,
                          const SurrogateSpec& spec = {}, LifStepCache<Scalar>* cache = nullptr) {
    params.validate();
    const Index batch = detail::lif_batch(psp, params, "psp");
    if (prev.isc.shape() != psp.shape() || prev.v.shape() != psp.shape()) {
        throw DimensionError("LIF state shape " + to_string(prev.isc.shape()) + " does not match psp " +
                             to_string(psp.shape()));
    }
    LifState<Scalar> next = LifState<Scalar>::zeros(psp.shape());
    Tensor<Scalar> v_pre(psp.shape());
    detail::lif_update(batch, params.neurons(), prev.isc.data(), prev.v.data(), psp.data(), params, spec,
                       next.isc.data(), v_pre.data(), next.v.data(), next.spk.data());
    if (cache != nullptr) {
        *cache = {prev.isc, prev.v, std::move(v_pre), next.spk};
    }
    return next;
}

template <typename Scalar>
struct LifStepGradients {
    Tensor<Scalar> grad_psp;
    Tensor<Scalar> grad_prev_isc;
    Tensor<Scalar> grad_prev_v;
    Tensor<Scalar> grad_w_scd;
    Tensor<Scalar> grad_w_vd;
};

/// Reverse of lif_step. The cotangents refer to the returned state (isc, v, spk);
/// spk's dependence on v_pre goes through the surrogate, including inside the
/// reset expression v = v_reset*spk + v_pre*(1-spk).
template <typename Scalar>
LifStepGradients<Scalar> lif_step_backward(const LifState<Scalar>& grad_next, const LifStepCache<Scalar>& cache,
                                           const LifParams<Scalar>& params, const SurrogateSpec& spec = {}) {
    params.validate();
    if (cache.v_pre.empty() || cache.spk.empty() || cache.prev_isc.empty() || cache.prev_v.empty()) {
        throw ContractError("lif_step_backward requires a populated forward cache");
    }
    const Shape& shape = cache.v_pre.shape();
    for (const auto* t : {&grad_next.isc, &grad_next.v, &grad_next.spk, &cache.prev_isc, &cache.prev_v, &cache.spk}) {
        if (t->shape() != shape) throw DimensionError("lif_step_backward operand shape mismatch");
    }
    const Index batch = detail::lif_batch(cache.v_pre, params, "v_pre");
    LifStepGradients<Scalar> g{Tensor<Scalar>(shape), Tensor<Scalar>(shape), Tensor<Scalar>(shape),
                               Tensor<Scalar>(params.w_scd.shape()), Tensor<Scalar>(params.w_vd.shape())};
    detail::lif_update_backward(batch, params.neurons(), grad_next.isc.data(), grad_next.v.data(),
                                grad_next.spk.data(), cache.prev_isc.data(), cache.prev_v.data(), cache.v_pre.data(),
                                cache.spk.data(), params, spec, g.grad_psp.data(), g.grad_prev_isc.data(),
                                g.grad_prev_v.data(), g.grad_w_scd.data(), g.grad_w_vd.data());
    return g;
}

}  // namespace w2s
