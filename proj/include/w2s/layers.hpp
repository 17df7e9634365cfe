#pragma once

#include <string>

#include "w2s/lif.hpp"
#include "w2s/tensor.hpp"

namespace w2s {

/// Real-valued wafer tensor -> 7x7 correlation -> LIF. The same wafer tensor is
/// presented at every time step; only the LIF state carries time.
template <typename Scalar>
struct EncoderLayer {
    Tensor<Scalar> kernel;  // (C, D, K, K), stride 1, no padding
    Tensor<Scalar> bias;    // (C)
    LifParams<Scalar> lif;  // neuron shape (C, H-K+1, W-K+1)
};

template <typename Scalar>
struct SpikingConvLayer {
    Tensor<Scalar> kernel;  // (C, D, Kh, Kw)
    Tensor<Scalar> bias;    // (C)
    Index stride = 1;
    Index padding = 0;
    LifParams<Scalar> lif;  // neuron shape (C, H', W')
};

template <typename Scalar>
struct SpikingFcLayer {
    Tensor<Scalar> weight;  // (U, U_prev)
    Tensor<Scalar> bias;    // (U)
    LifParams<Scalar> lif;  // neuron shape (U)
};

/// Non-spiking decoder: per-step affine readout, then a learned scalar weight
/// per time step for the temporal sum.
template <typename Scalar>
struct OutputLayer {
    Tensor<Scalar> weight;        // (classes, U)
    Tensor<Scalar> bias;          // (classes)
    Tensor<Scalar> time_weights;  // (T)
};

/// Result of driving one layer for a single time step.
template <typename Scalar>
struct LayerStep {
    Tensor<Scalar> spikes;
    LifState<Scalar> next;
    LifStepCache<Scalar> cache;
    Tensor<Scalar> psp;
};

namespace detail {

inline Shape batched(Index batch, const Shape& neuron_shape) {
    Shape s{batch};
    s.insert(s.end(), neuron_shape.begin(), neuron_shape.end());
    return s;
}

template <typename Scalar>
bool is_binary(const Tensor<Scalar>& t) {
    for (Scalar x : t.values()) {
        if (x != Scalar(0) && x != Scalar(1)) return false;
    }
    return true;
}

template <typename Scalar>
LayerStep<Scalar> drive_lif(Tensor<Scalar> psp, const LifParams<Scalar>& lif, const LifState<Scalar>& prev,
                            const SurrogateSpec& spec, const char* layer) {
    const Shape expected = batched(psp.dim(0), lif.w_scd.shape());
    if (psp.shape() != expected) {
        throw DimensionError(std::string(layer) + " potential shape " + to_string(psp.shape()) +
                             " does not match neuron shape " + to_string(lif.w_scd.shape()));
    }
    LayerStep<Scalar> step;
    const LifState<Scalar> start = prev.isc.empty() ? LifState<Scalar>::zeros(psp.shape()) : prev;
    step.next = lif_step(start, psp, lif, spec, &step.cache);
    step.spikes = step.next.spk;
    step.psp = std::move(psp);
    return step;
}

}  // namespace detail

/// One encoder step. `prev` may be default-constructed for t = 0.
template <typename Scalar>
LayerStep<Scalar> encoder_forward(const Tensor<Scalar>& wafer_input, const EncoderLayer<Scalar>& layer,
                                  const LifState<Scalar>& prev, const SurrogateSpec& spec = {}) {
    return detail::drive_lif(conv2d(wafer_input, layer.kernel, layer.bias, 1, 0), layer.lif, prev, spec, "encoder");
}

/// One spiking-convolution step. With `checked`, non-binary input raises ContractError.
template <typename Scalar>
LayerStep<Scalar> spiking_conv_forward(const Tensor<Scalar>& spikes_in, const SpikingConvLayer<Scalar>& layer,
                                       const LifState<Scalar>& prev, const SurrogateSpec& spec = {},
                                       bool checked = false) {
    if (checked && !detail::is_binary(spikes_in)) {
        throw ContractError("spiking conv input must be 0/1 valued");
    }
    return detail::drive_lif(conv2d(spikes_in, layer.kernel, layer.bias, layer.stride, layer.padding), layer.lif,
                             prev, spec, "spiking conv");
}

template <typename Scalar>
LayerStep<Scalar> spiking_fc_forward(const Tensor<Scalar>& spikes_in, const SpikingFcLayer<Scalar>& layer,
                                     const LifState<Scalar>& prev, const SurrogateSpec& spec = {},
                                     bool checked = false) {
    if (checked && !detail::is_binary(spikes_in)) {
        throw ContractError("spiking fc input must be 0/1 valued");
    }
    return detail::drive_lif(matmul_affine(spikes_in, layer.weight, layer.bias), layer.lif, prev, spec, "spiking fc");
}

template <typename Scalar>
struct Decoded {
    Tensor<Scalar> class_scores;  // (B, classes), unnormalized
    Tensor<Scalar> per_step;      // (T, B, classes)
};

/// prob_t = W spk_t + b for every step, class_scores = sum_t w_t prob_t.
/// spike_history is (T, B, U) or any (T*B, U)-compatible layout with T leading.
template <typename Scalar>
Decoded<Scalar> output_decode(const Tensor<Scalar>& spike_history, const OutputLayer<Scalar>& layer) {
    const Index steps = layer.time_weights.size();
    if (spike_history.rank() < 2 || spike_history.dim(0) != steps) {
        throw DimensionError("spike history " + to_string(spike_history.shape()) + " does not cover " +
                             std::to_string(steps) + " time steps");
    }
    const Index units = layer.weight.dim(1);
    if (spike_history.size() % (steps * units) != 0) {
        throw DimensionError("spike history " + to_string(spike_history.shape()) + " does not hold " +
                             std::to_string(units) + "-unit rows");
    }
    const Index batch = spike_history.size() / (steps * units);
    const Index classes = layer.weight.dim(0);
    const Tensor<Scalar> rows = spike_history.reshaped({steps * batch, units});
    Decoded<Scalar> out{Tensor<Scalar>({batch, classes}),
                        matmul_affine(rows, layer.weight, layer.bias).reshaped({steps, batch, classes})};
    auto scores = out.class_scores.matrix();
    const auto per_step = out.per_step.matrix(steps * batch, classes);
    for (Index t = 0; t < steps; ++t) {
        scores += layer.time_weights.data()[t] * per_step.middleRows(t * batch, batch);
    }
    return out;
}

}  // namespace w2s
