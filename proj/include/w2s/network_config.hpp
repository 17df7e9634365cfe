#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "w2s/tensor.hpp"

namespace w2s {

enum class Variant { C2, C3, C4 };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ConvLayerSpec {
    Index channels = 128;
    Index kernel = 3;
    Index stride = 1;
    Index padding = 0;

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

enum class LayerKind : std::uint8_t { Encoder = 1, SpikingConv = 2, SpikingFc = 3, Output = 4 };

/// Resolved geometry of one layer in the stack.
struct LayerDescriptor {
    LayerKind kind;
    Shape input_shape;   // per sample
    Shape neuron_shape;  // per sample output; (classes) for the decoder
    Index kernel_h = 0, kernel_w = 0, stride = 1, padding = 0;

    std::string name;
};

/// Architecture of the encoder / spiking-conv / spiking-FC / decoder stack.
/// Defaults are the 2C variant on 36x36 wafers with 9 classes and T = 4.
struct NetworkConfig {
    Index input_size = 36;
    Index input_channels = 1;
    Index encoder_channels = 64;
    Index encoder_kernel = 7;
    std::vector<ConvLayerSpec> convs{{128, 3, 2, 0}, {128, 3, 2, 0}};
    Index fc_units = 256;
    Index classes = 9;
    Index time_steps = 4;
    double v_thr = 1.0;
    double v_reset = 0.0;
    double w_scd_init = 0.7;
    double w_vd_init = 0.8;
    // Weights feeding LIF neurons start in U(-b, b), b = sqrt(init_scale / fan_in).
    // 6 (He uniform) keeps spikes alive through the stack; with 1 the spike
    // density, and with it every surrogate gradient, dies out before the FC layer.
    double init_scale = 6.0;

    static NetworkConfig for_variant(Variant v);

    /// Walks the stack and returns every layer's geometry; throws
    /// DimensionError / GeometryError / InputError if the pipeline is not closed.
    std::vector<LayerDescriptor> describe() const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

}  // namespace w2s
