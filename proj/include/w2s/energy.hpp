#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "w2s/network.hpp"
#include "w2s/training.hpp"

namespace w2s {

/// Energy per synaptic operation on neuromorphic hardware, joules.
inline constexpr double kJoulesPerSop = 77e-15;
/// Energy per floating point operation on conventional hardware, joules.
inline constexpr double kJoulesPerFlop = 12.5e-12;

/// c * d * w_c * h_c * w_w * h_w * 2 (multiply and add per kernel tap).
std::int64_t flops_conv(std::int64_t c, std::int64_t d, std::int64_t w_c, std::int64_t h_c, std::int64_t w_w,
                        std::int64_t h_w);
/// u * u_prev * 2.
std::int64_t flops_fc(std::int64_t u, std::int64_t u_prev);
/// T * gamma * FLOPs.
double sops(double layer_flops, double gamma, std::int64_t time_steps);
double power_snn_mj(double total_sops);
double power_dnn_mj(double total_flops);

/// Input-spike statistics of one layer. gamma is the mean spike density over
/// the layer's input sites, time steps and samples, so it lies in [0, 1].
struct FiringStats {
    std::string layer;
    double spikes = 0.0;    // total input spikes per sample over the T steps
    std::int64_t sites = 0; // input neuron sites per sample
    std::int64_t time_steps = 0;
    double gamma = 0.0;
};

/// gamma of a (T*B, sites...) spike record: spikes / (T * B * sites).
template <typename Scalar>
double firing_rate(const Tensor<Scalar>& spike_history, Index time_steps) {
    if (time_steps < 1 || spike_history.empty()) throw InputError("firing_rate needs T >= 1 and a spike record");
    return static_cast<double>(spike_history.vec().template cast<double>().sum()) /
           static_cast<double>(spike_history.size());
}

/// Runs the spiking stack over `data` and records the input firing rate of
/// every layer that consumes spikes (spiking convs, spiking FC, decoder).
/// Batches are processed in order and counts merged afterwards.
template <typename Scalar>
std::vector<FiringStats> measure_firing_rates(const Network<Scalar>& net, const TensorDataset<Scalar>& data,
                                              Index time_steps, Index batch_size = 64) {
    if (data.size() == 0) throw InputError("firing-rate measurement needs at least one sample");
    if (batch_size < 1) throw InputError("batch_size must be at least 1");
    const auto layers = net.config().describe();
    std::vector<FiringStats> stats;
    for (std::size_t i = 1; i < layers.size(); ++i) {
        FiringStats s;
        s.layer = layers[i].name;
        s.sites = static_cast<std::int64_t>(shape_size(layers[i].input_shape));
        s.time_steps = time_steps;
        stats.push_back(s);
    }
    std::vector<double> totals(stats.size(), 0.0);
    std::vector<Index> idx;
    for (Index first = 0; first < data.size(); first += batch_size) {
        const Index count = std::min(batch_size, data.size() - first);
        idx.resize(static_cast<std::size_t>(count));
        std::iota(idx.begin(), idx.end(), first);
        const auto fwd = run_spiking_stack(data.gather(idx), net, time_steps);
        // trace k feeds layer k+1 in the descriptor list
        for (std::size_t k = 0; k < fwd.traces.size(); ++k) {
            totals[k] += fwd.traces[k].spk.vec().template cast<double>().sum();
        }
    }
    const double samples = static_cast<double>(data.size());
    for (std::size_t k = 0; k < stats.size(); ++k) {
        stats[k].spikes = totals[k] / samples;
        stats[k].gamma =
            totals[k] / (samples * static_cast<double>(time_steps) * static_cast<double>(stats[k].sites));
    }
    return stats;
}

struct LayerCost {
    std::string layer;
    LayerKind kind = LayerKind::Encoder;
    bool spiking_input = false;  // costed as SOPs when true, FLOPs otherwise
    std::int64_t flops = 0;
    double gamma = 0.0;
    double sops = 0.0;
    double energy_mj = 0.0;
    // c, d, w_c, h_c, w_w, h_w for convolutions; u, u_prev for FC layers
    std::vector<std::int64_t> descriptor;
};

struct EnergyReport {
    std::string model;
    std::int64_t time_steps = 0;
    std::vector<LayerCost> layers;
    std::int64_t spiking_flops = 0;  // per-step FLOPs of spike-driven layers
    double total_sops = 0.0;
    double spiking_mj = 0.0;   // 77 fJ x total SOPs
    std::int64_t encoder_flops = 0;
    double encoder_mj = 0.0;   // 12.5 pJ x encoder FLOPs (real-valued input)
    double total_mj_with_encoder = 0.0;
};

/// FLOPs per layer, SOPs = T * gamma * FLOPs for spike-driven layers, SNN energy
/// for those and DNN energy for the real-valued encoder convolution.
EnergyReport estimate_network_energy(const NetworkConfig& config, const std::vector<FiringStats>& stats,
                                     std::int64_t time_steps, const std::string& model = "Wafer2Spike");

/// One-row report for a conventional network with published FLOPs.
EnergyReport baseline_energy(const std::string& model, double flops);

/// Table with Model/Layer, FLOPs (1e9), SOPs (1e9), gamma, Power (mJ).
void print_energy_table(std::ostream& os, const EnergyReport& report);
/// CSV "model,flops,sops,mJ": one row per layer plus total rows.
void write_energy_csv(std::ostream& os, const EnergyReport& report);

}  // namespace w2s
