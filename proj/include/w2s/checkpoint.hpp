#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "w2s/network.hpp"

namespace w2s {

/// "W2S1" checkpoint container, all integers and floats little-endian:
///
///   char[4]  magic "W2S1"
///   u32      format version (1)
///   u32      epoch the parameters were saved after (0 = untrained)
///   u32      time steps T
///   f32      v_thr
///   f32      v_reset
///   u32      layer count
///   per layer:
///     u8       type tag (1 encoder, 2 spiking conv, 3 spiking fc, 4 output)
///     u8       n, number of descriptor ints
///     u32[n]   encoder: C, D, K, K, stride, padding, input size
///              conv:    C, D, Kh, Kw, stride, padding
///              fc:      U, U_prev
///              output:  classes, U, T
///   u32      tensor count
///   per tensor, in Network::parameters() order:
///     u8       rank
///     u32[rank] extents
///     f32[prod(extents)] values
///
/// Saving then loading reproduces every parameter bit for bit.
struct Checkpoint {
    Network<float> network;
    std::uint32_t epoch = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net, std::uint32_t epoch = 0);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net, std::uint32_t epoch = 0);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// True when two configs describe the same layer stack (init constants ignored).
bool same_architecture(const NetworkConfig& a, const NetworkConfig& b);

}  // namespace w2s
