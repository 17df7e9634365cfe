#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "w2s/layers.hpp"
#include "w2s/network_config.hpp"

namespace w2s {

enum class ParamKind { Weight, Bias, Decay, TimeWeight };

template <typename Scalar>
struct ParamRef {
    std::string name;
    Tensor<Scalar>* tensor;
    ParamKind kind;
};

/// Gradients aligned one-to-one with Network::parameters().
template <typename Scalar>
struct Gradients {
    std::vector<Tensor<Scalar>> tensors;
};

/// Encoder, spiking convolutions, spiking FC and decoder with all learnable
/// parameters. Construction validates the shape pipeline.
template <typename Scalar>
class Network {
public:
    Network() = default;

    /// Uniform init with bound sqrt(scale / fan_in): scale = config.init_scale
    /// for weights that drive LIF neurons, 1 for the decoder. Zero biases,
    /// decays from the config, time weights 1/T.
    Network(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
        const auto layers = config_.describe();
        std::mt19937_64 rng(seed);
        auto uniform = [&rng](Tensor<Scalar>& t, Index fan_in, double scale) {
            const double bound = std::sqrt(scale / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Scalar& x : t.values()) x = static_cast<Scalar>(dist(rng));
        };
        auto lif = [this](const Shape& shape) {
            return LifParams<Scalar>::uniform(shape, static_cast<Scalar>(config_.w_scd_init),
                                              static_cast<Scalar>(config_.w_vd_init),
                                              static_cast<Scalar>(config_.v_thr), static_cast<Scalar>(config_.v_reset));
        };

        const auto& enc = layers.front();
        encoder_.kernel = Tensor<Scalar>({config_.encoder_channels, config_.input_channels, enc.kernel_h, enc.kernel_w});
        encoder_.bias = Tensor<Scalar>({config_.encoder_channels});
        encoder_.lif = lif(enc.neuron_shape);
        uniform(encoder_.kernel, config_.input_channels * enc.kernel_h * enc.kernel_w, config_.init_scale);

        for (std::size_t i = 0; i < config_.convs.size(); ++i) {
            const auto& d = layers[i + 1];
            SpikingConvLayer<Scalar> layer;
            layer.kernel = Tensor<Scalar>({d.neuron_shape[0], d.input_shape[0], d.kernel_h, d.kernel_w});
            layer.bias = Tensor<Scalar>({d.neuron_shape[0]});
            layer.stride = d.stride;
            layer.padding = d.padding;
            layer.lif = lif(d.neuron_shape);
            uniform(layer.kernel, d.input_shape[0] * d.kernel_h * d.kernel_w, config_.init_scale);
            convs_.push_back(std::move(layer));
        }

        const auto& fc = layers[layers.size() - 2];
        fc_.weight = Tensor<Scalar>({config_.fc_units, fc.input_shape[0]});
        fc_.bias = Tensor<Scalar>({config_.fc_units});
        fc_.lif = lif({config_.fc_units});
        uniform(fc_.weight, fc.input_shape[0], config_.init_scale);

        output_.weight = Tensor<Scalar>({config_.classes, config_.fc_units});
        output_.bias = Tensor<Scalar>({config_.classes});
        output_.time_weights =
            Tensor<Scalar>({config_.time_steps}, static_cast<Scalar>(1.0 / static_cast<double>(config_.time_steps)));
        uniform(output_.weight, config_.fc_units, 1.0);
    }

    const NetworkConfig& config() const { return config_; }

    EncoderLayer<Scalar>& encoder() { return encoder_; }
    const EncoderLayer<Scalar>& encoder() const { return encoder_; }
    std::vector<SpikingConvLayer<Scalar>>& convs() { return convs_; }
    const std::vector<SpikingConvLayer<Scalar>>& convs() const { return convs_; }
    SpikingFcLayer<Scalar>& fc() { return fc_; }
    const SpikingFcLayer<Scalar>& fc() const { return fc_; }
    OutputLayer<Scalar>& output() { return output_; }
    const OutputLayer<Scalar>& output() const { return output_; }

    /// Every learnable tensor in declaration order: encoder, convs, fc, decoder;
    /// within a spiking layer kernel/weight, bias, w_scd, w_vd.
    std::vector<ParamRef<Scalar>> parameters() {
        std::vector<ParamRef<Scalar>> out;
        auto spiking = [&out](const std::string& prefix, Tensor<Scalar>& w, Tensor<Scalar>& b, LifParams<Scalar>& lif) {
            out.push_back({prefix + ".weight", &w, ParamKind::Weight});
            out.push_back({prefix + ".bias", &b, ParamKind::Bias});
            out.push_back({prefix + ".w_scd", &lif.w_scd, ParamKind::Decay});
            out.push_back({prefix + ".w_vd", &lif.w_vd, ParamKind::Decay});
        };
        spiking("encoder", encoder_.kernel, encoder_.bias, encoder_.lif);
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            spiking("conv" + std::to_string(i + 1), convs_[i].kernel, convs_[i].bias, convs_[i].lif);
        }
        spiking("fc", fc_.weight, fc_.bias, fc_.lif);
        out.push_back({"output.weight", &output_.weight, ParamKind::Weight});
        out.push_back({"output.bias", &output_.bias, ParamKind::Bias});
        out.push_back({"output.time_weights", &output_.time_weights, ParamKind::TimeWeight});
        return out;
    }

    std::vector<const Tensor<Scalar>*> parameters() const {
        std::vector<const Tensor<Scalar>*> out;
        for (const auto& p : const_cast<Network*>(this)->parameters()) out.push_back(p.tensor);
        return out;
    }

    Gradients<Scalar> zero_gradients() const {
        Gradients<Scalar> g;
        for (const auto* p : parameters()) g.tensors.emplace_back(p->shape());
        return g;
    }

    Index parameter_count() const {
        Index n = 0;
        for (const auto* p : parameters()) n += p->size();
        return n;
    }

    template <typename Other>
    Network<Other> cast() const {
        Network<Other> out;
        out.config_ = config_;
        out.convs_.resize(convs_.size());
        auto dst = out.parameters();
        const auto src = parameters();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i]->template cast<Other>();
        out.sync_constants();
        return out;
    }

    /// Re-derives non-learnable fields (strides, thresholds) from the config
    /// after parameters were assigned directly, e.g. when loading a checkpoint.
    void sync_constants() {
        const auto layers = config_.describe();
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            convs_[i].stride = layers[i + 1].stride;
            convs_[i].padding = layers[i + 1].padding;
        }
        for (LifParams<Scalar>* lif : lif_params()) {
            lif->v_thr = static_cast<Scalar>(config_.v_thr);
            lif->v_reset = static_cast<Scalar>(config_.v_reset);
        }
    }

    /// Builds an all-zero network with the config's shapes.
    static Network zeros(const NetworkConfig& config) {
        Network net(config, 0);
        for (auto& p : net.parameters()) p.tensor->set_zero();
        return net;
    }

    std::vector<LifParams<Scalar>*> lif_params() {
        std::vector<LifParams<Scalar>*> out{&encoder_.lif};
        for (auto& c : convs_) out.push_back(&c.lif);
        out.push_back(&fc_.lif);
        return out;
    }

private:
    template <typename>
    friend class Network;

    NetworkConfig config_;
    EncoderLayer<Scalar> encoder_;
    std::vector<SpikingConvLayer<Scalar>> convs_;
    SpikingFcLayer<Scalar> fc_;
    OutputLayer<Scalar> output_;
};

/// Per-layer record of a T-step run. Every tensor is (T*B, neuron shape...),
/// time-major: rows [t*B, (t+1)*B) belong to step t.
template <typename Scalar>
struct LayerTrace {
    Tensor<Scalar> isc;
    Tensor<Scalar> v;
    Tensor<Scalar> v_pre;
    Tensor<Scalar> spk;
};

template <typename Scalar>
struct ForwardOptions {
    SurrogateSpec surrogate{};
    bool checked = false;  // verify spike traffic is binary
};

/// Everything the reverse pass needs.
template <typename Scalar>
struct ForwardResult {
    Index steps = 0;
    Index batch = 0;
    Tensor<Scalar> input;                     // (B, D, H, W)
    std::vector<LayerTrace<Scalar>> traces;   // encoder, convs..., fc
    Tensor<Scalar> class_scores;              // (B, classes)
    Tensor<Scalar> per_step;                  // (T, B, classes)
};

namespace detail {

// Runs `steps` LIF updates where the drive for step t is rows [t*B,(t+1)*B)
// of `psp`, or the same B rows every step when `static_drive` is set.
template <typename Scalar>
LayerTrace<Scalar> run_lif_over_time(const Tensor<Scalar>& psp, Index steps, Index batch, bool static_drive,
                                     const LifParams<Scalar>& lif, const SurrogateSpec& spec) {
    const Index neurons = lif.neurons();
    Shape shape = batched(steps * batch, lif.w_scd.shape());
    const Index expected = (static_drive ? batch : steps * batch) * neurons;
    if (psp.size() != expected) {
        throw DimensionError("layer potential " + to_string(psp.shape()) + " does not match neuron shape " +
                             to_string(lif.w_scd.shape()));
    }
    LayerTrace<Scalar> tr{Tensor<Scalar>(shape), Tensor<Scalar>(shape), Tensor<Scalar>(shape), Tensor<Scalar>(shape)};
    const Tensor<Scalar> zero({batch * neurons});
    const Index stride = batch * neurons;
    for (Index t = 0; t < steps; ++t) {
        const Scalar* prev_isc = t == 0 ? zero.data() : tr.isc.data() + (t - 1) * stride;
        const Scalar* prev_v = t == 0 ? zero.data() : tr.v.data() + (t - 1) * stride;
        const Scalar* drive = psp.data() + (static_drive ? 0 : t * stride);
        lif_update(batch, neurons, prev_isc, prev_v, drive, lif, spec, tr.isc.data() + t * stride,
                   tr.v_pre.data() + t * stride, tr.v.data() + t * stride, tr.spk.data() + t * stride);
    }
    return tr;
}

}  // namespace detail

/// Runs encoder and spiking stack for `steps` time steps on a static input.
/// Layers are evaluated one at a time over all steps; since layer L at step t
/// only depends on layer L-1 at steps <= t this equals step-by-step unrolling.
template <typename Scalar>
ForwardResult<Scalar> run_spiking_stack(const Tensor<Scalar>& input, const Network<Scalar>& net, Index steps,
                                        const ForwardOptions<Scalar>& options = {}) {
    if (steps < 1) throw InputError("time steps must be at least 1");
    options.surrogate.validate();
    const auto& cfg = net.config();
    const Shape expected_in{input.rank() > 0 ? input.dim(0) : 0, cfg.input_channels, cfg.input_size, cfg.input_size};
    if (input.shape() != expected_in) {
        throw DimensionError("network input " + to_string(input.shape()) + " expected (B," +
                             std::to_string(cfg.input_channels) + "," + std::to_string(cfg.input_size) + "," +
                             std::to_string(cfg.input_size) + ")");
    }
    ForwardResult<Scalar> out;
    out.steps = steps;
    out.batch = input.dim(0);
    out.input = input;

    const auto& enc = net.encoder();
    const Tensor<Scalar> enc_psp = conv2d(input, enc.kernel, enc.bias, 1, 0);
    out.traces.push_back(detail::run_lif_over_time(enc_psp, steps, out.batch, true, enc.lif, options.surrogate));

    for (const auto& layer : net.convs()) {
        const Tensor<Scalar>& spikes = out.traces.back().spk;
        if (options.checked && !detail::is_binary(spikes)) throw ContractError("non-binary spikes between layers");
        const Tensor<Scalar> psp = conv2d(spikes, layer.kernel, layer.bias, layer.stride, layer.padding);
        out.traces.push_back(detail::run_lif_over_time(psp, steps, out.batch, false, layer.lif, options.surrogate));
    }

    const Tensor<Scalar>& flat = out.traces.back().spk;
    if (options.checked && !detail::is_binary(flat)) throw ContractError("non-binary spikes between layers");
    const Tensor<Scalar> fc_psp = matmul_affine(flat, net.fc().weight, net.fc().bias);
    out.traces.push_back(detail::run_lif_over_time(fc_psp, steps, out.batch, false, net.fc().lif, options.surrogate));
    return out;
}

/// Full forward pass: spiking stack for T steps then the temporal decoder.
/// T must equal the decoder's number of time weights.
template <typename Scalar>
ForwardResult<Scalar> network_forward(const Tensor<Scalar>& input, const Network<Scalar>& net, Index steps,
                                      const ForwardOptions<Scalar>& options = {}) {
    if (steps != net.output().time_weights.size()) {
        throw DimensionError("network has " + std::to_string(net.output().time_weights.size()) +
                             " time weights but T = " + std::to_string(steps));
    }
    auto out = run_spiking_stack(input, net, steps, options);
    const Tensor<Scalar>& fc_spikes = out.traces.back().spk;
    auto decoded = output_decode(fc_spikes.reshaped({steps, out.batch, net.config().fc_units}), net.output());
    out.class_scores = std::move(decoded.class_scores);
    out.per_step = std::move(decoded.per_step);
    return out;
}

template <typename Scalar>
ForwardResult<Scalar> network_forward(const Tensor<Scalar>& input, const Network<Scalar>& net,
                                      const ForwardOptions<Scalar>& options = {}) {
    return network_forward(input, net, net.config().time_steps, options);
}

}  // namespace w2s
