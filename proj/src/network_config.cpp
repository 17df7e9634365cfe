#include "w2s/network_config.hpp"

namespace w2s {

Variant parse_variant(const std::string& name) {
    if (name == "2C" || name == "2c") return Variant::C2;
    if (name == "3C" || name == "3c") return Variant::C3;
    if (name == "4C" || name == "4c") return Variant::C4;
    throw InputError("unknown model variant '" + name + "' (expected 2C, 3C or 4C)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::C2: return "2C";
        case Variant::C3: return "3C";
        case Variant::C4: return "4C";
    }
    return "?";
}

NetworkConfig NetworkConfig::for_variant(Variant v) {
    NetworkConfig cfg;
    // 30 -> 14 -> 6, then optional same-size 3x3 layers
    cfg.convs = {{128, 3, 2, 0}, {128, 3, 2, 0}};
    if (v == Variant::C3 || v == Variant::C4) cfg.convs.push_back({128, 3, 1, 1});
    if (v == Variant::C4) cfg.convs.push_back({128, 3, 1, 1});
    return cfg;
}

std::vector<LayerDescriptor> NetworkConfig::describe() const {
    if (input_size <= 0 || input_channels <= 0 || encoder_channels <= 0 || encoder_kernel <= 0 || fc_units <= 0 ||
        classes <= 0) {
        throw InputError("network extents must be positive");
    }
    if (time_steps < 1) throw InputError("time_steps must be at least 1");
    if (fc_units < classes) throw InputError("fc_units must be at least the number of classes");
    if (!(v_thr > v_reset)) throw InputError("v_thr must exceed v_reset");

    std::vector<LayerDescriptor> layers;
    const Index enc = conv_output_extent(input_size, encoder_kernel, 1, 0);
    layers.push_back({LayerKind::Encoder,
                      {input_channels, input_size, input_size},
                      {encoder_channels, enc, enc},
                      encoder_kernel,
                      encoder_kernel,
                      1,
                      0,
                      "encoder"});
    Shape current = layers.back().neuron_shape;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const auto& c = convs[i];
        if (c.channels <= 0 || c.kernel <= 0) throw InputError("conv layer extents must be positive");
        const Index h = conv_output_extent(current[1], c.kernel, c.stride, c.padding);
        const Index w = conv_output_extent(current[2], c.kernel, c.stride, c.padding);
        layers.push_back({LayerKind::SpikingConv, current, {c.channels, h, w}, c.kernel, c.kernel, c.stride,
                          c.padding, "conv" + std::to_string(i + 1)});
        current = layers.back().neuron_shape;
    }
    layers.push_back({LayerKind::SpikingFc, {shape_size(current)}, {fc_units}, 0, 0, 1, 0, "fc"});
    layers.push_back({LayerKind::Output, {fc_units}, {classes}, 0, 0, 1, 0, "output"});

    for (std::size_t i = 1; i < layers.size(); ++i) {
        if (shape_size(layers[i].input_shape) != shape_size(layers[i - 1].neuron_shape)) {
            throw DimensionError("layer " + layers[i].name + " input " + to_string(layers[i].input_shape) +
                                 " does not match " + layers[i - 1].name + " output " +
                                 to_string(layers[i - 1].neuron_shape));
        }
    }
    return layers;
}

}  // namespace w2s
