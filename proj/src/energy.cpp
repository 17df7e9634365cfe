#include "w2s/energy.hpp"

#include <iomanip>
#include <sstream>

namespace w2s {

namespace {

void require_positive(std::initializer_list<std::int64_t> values) {
    for (auto v : values) {
        if (v <= 0) throw InputError("FLOPs descriptors must be positive");
    }
}

}  // namespace

std::int64_t flops_conv(std::int64_t c, std::int64_t d, std::int64_t w_c, std::int64_t h_c, std::int64_t w_w,
                        std::int64_t h_w) {
    require_positive({c, d, w_c, h_c, w_w, h_w});
    return c * d * w_c * h_c * w_w * h_w * 2;
}

std::int64_t flops_fc(std::int64_t u, std::int64_t u_prev) {
    require_positive({u, u_prev});
    return u * u_prev * 2;
}

double sops(double layer_flops, double gamma, std::int64_t time_steps) {
    if (gamma < 0.0) throw InputError("firing rate must be non-negative");
    if (time_steps < 1) throw InputError("time steps must be at least 1");
    return static_cast<double>(time_steps) * gamma * layer_flops;
}

double power_snn_mj(double total_sops) {
    if (total_sops < 0.0) throw InputError("SOPs must be non-negative");
    return kJoulesPerSop * total_sops * 1e3;
}

double power_dnn_mj(double total_flops) {
    if (total_flops < 0.0) throw InputError("FLOPs must be non-negative");
    return kJoulesPerFlop * total_flops * 1e3;
}

EnergyReport estimate_network_energy(const NetworkConfig& config, const std::vector<FiringStats>& stats,
                                     std::int64_t time_steps, const std::string& model) {
    const auto layers = config.describe();
    if (stats.size() != layers.size() - 1) {
        throw InputError("firing statistics cover " + std::to_string(stats.size()) + " layers, network has " +
                         std::to_string(layers.size() - 1) + " spike-driven layers");
    }
    EnergyReport report;
    report.model = model;
    report.time_steps = time_steps;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& d = layers[i];
        LayerCost cost;
        cost.layer = d.name;
        cost.kind = d.kind;
        if (d.kind == LayerKind::Encoder || d.kind == LayerKind::SpikingConv) {
            cost.descriptor = {d.neuron_shape[0], d.input_shape[0], d.neuron_shape[2], d.neuron_shape[1],
                               d.kernel_w,        d.kernel_h};
            cost.flops = flops_conv(cost.descriptor[0], cost.descriptor[1], cost.descriptor[2], cost.descriptor[3],
                                    cost.descriptor[4], cost.descriptor[5]);
        } else {
            cost.descriptor = {d.neuron_shape[0], shape_size(d.input_shape)};
            cost.flops = flops_fc(cost.descriptor[0], cost.descriptor[1]);
        }
        if (i == 0) {
            cost.spiking_input = false;
            cost.energy_mj = power_dnn_mj(static_cast<double>(cost.flops));
            report.encoder_flops = cost.flops;
            report.encoder_mj = cost.energy_mj;
        } else {
            const FiringStats& s = stats[i - 1];
            if (s.layer != d.name) {
                throw InputError("firing statistics for '" + s.layer + "' do not match layer '" + d.name + "'");
            }
            cost.spiking_input = true;
            cost.gamma = s.gamma;
            cost.sops = sops(static_cast<double>(cost.flops), s.gamma, time_steps);
            cost.energy_mj = power_snn_mj(cost.sops);
            report.spiking_flops += cost.flops;
            report.total_sops += cost.sops;
            report.spiking_mj += cost.energy_mj;
        }
        report.layers.push_back(cost);
    }
    report.total_mj_with_encoder = report.spiking_mj + report.encoder_mj;
    return report;
}

EnergyReport baseline_energy(const std::string& model, double flops) {
    EnergyReport report;
    report.model = model;
    LayerCost cost;
    cost.layer = model;
    cost.flops = static_cast<std::int64_t>(flops);
    cost.energy_mj = power_dnn_mj(flops);
    report.layers.push_back(cost);
    report.encoder_flops = cost.flops;
    report.encoder_mj = cost.energy_mj;
    report.total_mj_with_encoder = cost.energy_mj;
    return report;
}

void print_energy_table(std::ostream& os, const EnergyReport& report) {
    auto g9 = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(4) << v / 1e9;
        return s.str();
    };
    auto mj = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(4) << v;
        return s.str();
    };
    os << "model: " << report.model;
    if (report.time_steps > 0) os << "  (T = " << report.time_steps << ")";
    os << '\n';
    os << std::left << std::setw(14) << "layer" << std::right << std::setw(16) << "FLOPs (1e9)" << std::setw(16)
       << "SOPs (1e9)" << std::setw(10) << "gamma" << std::setw(14) << "Power (mJ)" << '\n';
    for (const auto& c : report.layers) {
        os << std::left << std::setw(14) << c.layer << std::right << std::setw(16) << g9(static_cast<double>(c.flops))
           << std::setw(16) << (c.spiking_input ? g9(c.sops) : std::string("-")) << std::setw(10)
           << (c.spiking_input ? mj(c.gamma) : std::string("-")) << std::setw(14) << mj(c.energy_mj) << '\n';
    }
    if (report.time_steps > 0) {
        os << std::left << std::setw(14) << "spiking total" << std::right << std::setw(16)
           << g9(static_cast<double>(report.spiking_flops)) << std::setw(16) << g9(report.total_sops) << std::setw(10)
           << "" << std::setw(14) << mj(report.spiking_mj) << '\n';
        os << std::left << std::setw(14) << "with encoder" << std::right << std::setw(16) << "" << std::setw(16) << ""
           << std::setw(10) << "" << std::setw(14) << mj(report.total_mj_with_encoder) << '\n';
    }
}

void write_energy_csv(std::ostream& os, const EnergyReport& report) {
    os << "model,flops,sops,mJ\n";
    os << std::setprecision(10);
    for (const auto& c : report.layers) {
        os << report.model << '/' << c.layer << ',' << c.flops << ',' << c.sops << ',' << c.energy_mj << '\n';
    }
    if (report.time_steps > 0) {
        os << report.model << "/spiking_total," << report.spiking_flops << ',' << report.total_sops << ','
           << report.spiking_mj << '\n';
        os << report.model << "/total_with_encoder," << (report.spiking_flops + report.encoder_flops) << ','
           << report.total_sops << ',' << report.total_mj_with_encoder << '\n';
    }
}

}  // namespace w2s
