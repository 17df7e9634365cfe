#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "w2s/metrics.hpp"
#include "w2s/network.hpp"

namespace w2s {

// ---------------------------------------------------------------------------
// Loss

template <typename Scalar>
struct CrossEntropy {
    double loss = 0.0;
    Tensor<Scalar> grad_scores;  // (B, C)
};

/// Mean negative log-likelihood of row-wise softmax(scores). The gradient is
/// (softmax - onehot) / B.
template <typename Scalar>
CrossEntropy<Scalar> cross_entropy(const Tensor<Scalar>& scores, std::span<const int> labels) {
    if (scores.rank() != 2) throw DimensionError("class scores must be (B, C)");
    const Index batch = scores.dim(0);
    const Index classes = scores.dim(1);
    if (static_cast<Index>(labels.size()) != batch) {
        throw DimensionError("label count " + std::to_string(labels.size()) + " does not match batch " +
                             std::to_string(batch));
    }
    CrossEntropy<Scalar> out{0.0, Tensor<Scalar>(scores.shape())};
    const auto s = scores.matrix();
    auto g = out.grad_scores.matrix();
    for (Index i = 0; i < batch; ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= classes) {
            throw InputError("label " + std::to_string(label) + " outside [0," + std::to_string(classes) + ")");
        }
        const double top = s.row(i).maxCoeff();
        double denom = 0.0;
        for (Index c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(s(i, c)) - top);
        const double log_denom = std::log(denom);
        out.loss -= static_cast<double>(s(i, label)) - top - log_denom;
        for (Index c = 0; c < classes; ++c) {
            const double p = std::exp(static_cast<double>(s(i, c)) - top - log_denom);
            g(i, c) = static_cast<Scalar>((p - (c == label ? 1.0 : 0.0)) / static_cast<double>(batch));
        }
    }
    out.loss /= static_cast<double>(batch);
    return out;
}

/// Row-wise argmax; ties go to the lowest class index.
template <typename Scalar>
std::vector<int> predict_classes(const Tensor<Scalar>& scores) {
    const auto s = scores.matrix();
    std::vector<int> out(static_cast<std::size_t>(s.rows()));
    for (Index i = 0; i < s.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < s.cols(); ++c) {
            if (s(i, c) > s(i, best)) best = c;
        }
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatio-temporal backpropagation

namespace detail {

// Reverse pass of run_lif_over_time. Returns the cotangent on every step's
// drive, (T*B, neurons...), and accumulates decay gradients.
template <typename Scalar>
Tensor<Scalar> lif_backward_over_time(const LayerTrace<Scalar>& tr, const Tensor<Scalar>& grad_spk, Index steps,
                                      Index batch, const LifParams<Scalar>& lif, const SurrogateSpec& spec,
                                      Tensor<Scalar>& grad_w_scd, Tensor<Scalar>& grad_w_vd) {
    if (grad_spk.size() != tr.spk.size()) {
        throw ContractError("spike cotangent " + to_string(grad_spk.shape()) + " does not match trace " +
                            to_string(tr.spk.shape()));
    }
    const Index neurons = lif.neurons();
    const Index stride = batch * neurons;
    Tensor<Scalar> grad_psp(tr.spk.shape());
    // Temporal cotangents on isc_t and v_t flowing back from step t+1.
    Vector<Scalar> carry_isc = Vector<Scalar>::Zero(stride);
    Vector<Scalar> carry_v = Vector<Scalar>::Zero(stride);
    const Vector<Scalar> zero = Vector<Scalar>::Zero(stride);
    for (Index t = steps - 1; t >= 0; --t) {
        const Scalar* prev_isc = t == 0 ? zero.data() : tr.isc.data() + (t - 1) * stride;
        const Scalar* prev_v = t == 0 ? zero.data() : tr.v.data() + (t - 1) * stride;
        lif_update_backward(batch, neurons, carry_isc.data(), carry_v.data(), grad_spk.data() + t * stride, prev_isc,
                            prev_v, tr.v_pre.data() + t * stride, tr.spk.data() + t * stride, lif, spec,
                            grad_psp.data() + t * stride, carry_isc.data(), carry_v.data(), grad_w_scd.data(),
                            grad_w_vd.data());
    }
    return grad_psp;
}

}  // namespace detail

/// Reverse-mode gradients of the loss through the unrolled network, in both
/// layer depth and time. `grad_scores` is the cotangent on class_scores; the
/// forward result must come from network_forward with the same surrogate.
template <typename Scalar>
Gradients<Scalar> stbp_backward(const ForwardResult<Scalar>& fwd, const Tensor<Scalar>& grad_scores,
                                const Network<Scalar>& net, const SurrogateSpec& spec = {}) {
    const auto& cfg = net.config();
    const Index steps = fwd.steps;
    const Index batch = fwd.batch;
    const std::size_t n_convs = net.convs().size();
    if (fwd.traces.size() != n_convs + 2 || fwd.per_step.empty() || fwd.input.empty()) {
        throw ContractError("forward cache does not cover every layer of this network");
    }
    if (steps != net.output().time_weights.size() || fwd.per_step.dim(0) != steps) {
        throw ContractError("forward cache covers " + std::to_string(fwd.per_step.dim(0)) +
                            " steps but the network decodes " + std::to_string(net.output().time_weights.size()));
    }
    if (grad_scores.shape() != Shape{batch, cfg.classes}) {
        throw DimensionError("grad_scores " + to_string(grad_scores.shape()) + " does not match class scores");
    }

    Gradients<Scalar> grads = net.zero_gradients();
    auto& g = grads.tensors;
    const std::size_t fc_at = 4 * (n_convs + 1);
    const std::size_t out_at = fc_at + 4;

    // Decoder: scores = sum_t w_t (W spk_t + b)
    const auto gs = grad_scores.matrix();
    const auto per_step = fwd.per_step.matrix(steps * batch, cfg.classes);
    Tensor<Scalar> grad_per_step({steps * batch, cfg.classes});
    for (Index t = 0; t < steps; ++t) {
        const Scalar w = net.output().time_weights.data()[t];
        grad_per_step.matrix().middleRows(t * batch, batch) = w * gs;
        g[out_at + 2].data()[t] = (gs.array() * per_step.middleRows(t * batch, batch).array()).sum();
    }
    const Tensor<Scalar> fc_spikes = fwd.traces.back().spk.reshaped({steps * batch, cfg.fc_units});
    auto dec = matmul_affine_backward(grad_per_step, fc_spikes, net.output().weight);
    g[out_at] = std::move(dec.grad_weight);
    g[out_at + 1] = std::move(dec.grad_bias);
    Tensor<Scalar> grad_spk = std::move(dec.grad_input);

    // Spiking FC
    {
        const auto& layer = net.fc();
        Tensor<Scalar> grad_psp = detail::lif_backward_over_time(fwd.traces.back(), grad_spk, steps, batch, layer.lif,
                                                                 spec, g[fc_at + 2], g[fc_at + 3]);
        const Tensor<Scalar>& input = fwd.traces[n_convs].spk;
        auto aff = matmul_affine_backward(grad_psp, input, layer.weight);
        g[fc_at] = std::move(aff.grad_weight);
        g[fc_at + 1] = std::move(aff.grad_bias);
        grad_spk = std::move(aff.grad_input);
    }

    // Spiking convolutions, last to first
    for (std::size_t i = n_convs; i-- > 0;) {
        const auto& layer = net.convs()[i];
        const std::size_t at = 4 * (i + 1);
        Tensor<Scalar> grad_psp = detail::lif_backward_over_time(fwd.traces[i + 1], grad_spk, steps, batch, layer.lif,
                                                                 spec, g[at + 2], g[at + 3]);
        auto conv = conv2d_backward(grad_psp, fwd.traces[i].spk, layer.kernel, layer.stride, layer.padding, true);
        g[at] = std::move(conv.grad_kernel);
        g[at + 1] = std::move(conv.grad_bias);
        grad_spk = std::move(conv.grad_input);
    }

    // Encoder: the drive is the same conv output at every step, so its
    // cotangents are summed over time before one conv backward.
    {
        const auto& layer = net.encoder();
        Tensor<Scalar> grad_psp = detail::lif_backward_over_time(fwd.traces.front(), grad_spk, steps, batch, layer.lif,
                                                                 spec, g[2], g[3]);
        const Index per_step_size = grad_psp.size() / steps;
        Shape summed_shape = grad_psp.shape();
        summed_shape[0] = batch;
        Tensor<Scalar> summed(summed_shape);
        for (Index t = 0; t < steps; ++t) {
            summed.vec() += Eigen::Map<const Vector<Scalar>>(grad_psp.data() + t * per_step_size, per_step_size);
        }
        auto conv = conv2d_backward(summed, fwd.input, layer.kernel, 1, 0, false);
        g[0] = std::move(conv.grad_kernel);
        g[1] = std::move(conv.grad_bias);
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Optimizer

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // L2 on weights and kernels only
    bool checked = true;        // reject non-finite gradients
};

/// SGD or bias-corrected Adam over Network::parameters(), followed by
/// clamping every decay factor into [0, 1].
template <typename Scalar>
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config = {}) : config_(config) {
        if (!(config_.learning_rate > 0.0)) throw InputError("learning rate must be positive");
    }

    const OptimizerConfig& config() const { return config_; }
    void set_learning_rate(double lr) { config_.learning_rate = lr; }
    std::int64_t steps_taken() const { return step_; }

    void step(Network<Scalar>& net, const Gradients<Scalar>& grads) {
        auto params = net.parameters();
        if (grads.tensors.size() != params.size()) {
            throw DimensionError("gradient count does not match parameter count");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (grads.tensors[i].shape() != params[i].tensor->shape()) {
                throw DimensionError("gradient for " + params[i].name + " has shape " +
                                     to_string(grads.tensors[i].shape()));
            }
            if (config_.checked && !grads.tensors[i].vec().allFinite()) {
                throw NumericError("non-finite gradient for " + params[i].name);
            }
        }
        if (config_.kind == OptimizerKind::Adam && first_.empty()) {
            for (const auto& p : params) {
                first_.emplace_back(Vector<double>::Zero(p.tensor->size()));
                second_.emplace_back(Vector<double>::Zero(p.tensor->size()));
            }
        }
        ++step_;
        const double lr = config_.learning_rate;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto p = params[i].tensor->vec();
            Vector<double> g = grads.tensors[i].vec().template cast<double>();
            if (config_.weight_decay != 0.0 && params[i].kind == ParamKind::Weight) {
                g += config_.weight_decay * p.template cast<double>();
            }
            if (config_.kind == OptimizerKind::Sgd) {
                p = (p.template cast<double>() - lr * g).template cast<Scalar>();
            } else {
                first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * g;
                second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
                const Vector<double> update =
                    ((first_[i] / c1).array() / ((second_[i] / c2).array().sqrt() + config_.epsilon)).matrix();
                p = (p.template cast<double>() - lr * update).template cast<Scalar>();
            }
            if (params[i].kind == ParamKind::Decay) {
                p = p.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
            }
        }
    }

private:
    OptimizerConfig config_;
    std::int64_t step_ = 0;
    std::vector<Vector<double>> first_;
    std::vector<Vector<double>> second_;
};

// ---------------------------------------------------------------------------
// Training and evaluation loops

/// Normalized inputs (N, D, H, W) with integer labels.
template <typename Scalar>
struct TensorDataset {
    Tensor<Scalar> inputs;
    std::vector<int> labels;

    Index size() const { return static_cast<Index>(labels.size()); }

    Tensor<Scalar> gather(std::span<const Index> indices) const {
        Shape shape = inputs.shape();
        shape[0] = static_cast<Index>(indices.size());
        Tensor<Scalar> out(shape);
        const Index per = inputs.size() / inputs.dim(0);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            std::copy_n(inputs.data() + indices[i] * per, per, out.data() + static_cast<Index>(i) * per);
        }
        return out;
    }

    std::vector<int> gather_labels(std::span<const Index> indices) const {
        std::vector<int> out;
        out.reserve(indices.size());
        for (Index i : indices) out.push_back(labels[static_cast<std::size_t>(i)]);
        return out;
    }
};

struct TrainConfig {
    Index time_steps = 4;
    Index batch_size = 64;
    Index epochs = 10;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer{};
    Index lr_step_epochs = 0;  // 0 disables the step schedule
    double lr_gamma = 1.0;
    SurrogateSpec surrogate{};
    bool deterministic = true;
    bool checked = false;  // binary-spike and finiteness checks in the forward pass

    void validate() const {
        if (time_steps < 1) throw InputError("time_steps must be at least 1");
        if (batch_size < 1) throw InputError("batch_size must be at least 1");
        if (epochs < 0) throw InputError("epochs must be non-negative");
        if (!(optimizer.learning_rate > 0.0)) throw InputError("learning rate must be positive");
        surrogate.validate();
    }
};

struct LossReport {
    Index epoch = 0;
    double loss = 0.0;  // mean over the epoch's samples
    double train_accuracy = 0.0;
    Index n_samples = 0;
    Index n_classes = 0;
    std::vector<Index> per_class_correct;
    std::vector<Index> per_class_total;
    double wall_seconds = 0.0;
};

/// Epoch-local shuffle order; a pure function of (seed, epoch), so resumed
/// runs see the same order as uninterrupted ones.
inline std::vector<Index> epoch_permutation(Index n, std::uint64_t seed, Index epoch) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x57325331u};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

/// Called after every epoch; return false to stop early.
template <typename Scalar>
using EpochCallback = std::function<bool(const LossReport&, const Network<Scalar>&)>;

/// Mini-batch STBP training: shuffle, forward, cross-entropy, backward,
/// optimizer step. `first_epoch` > 1 resumes a run (shuffles and the learning
/// rate schedule pick up where they left off).
template <typename Scalar>
std::vector<LossReport> train(const TensorDataset<Scalar>& data, Network<Scalar>& net, const TrainConfig& config,
                              const EpochCallback<Scalar>& on_epoch = {}, Index first_epoch = 1) {
    config.validate();
    if (data.size() == 0) throw InputError("training set is empty");
    if (config.time_steps != net.output().time_weights.size()) {
        throw InputError("train config T = " + std::to_string(config.time_steps) + " but the network decodes " +
                         std::to_string(net.output().time_weights.size()) + " steps");
    }
    const Index classes = net.config().classes;
    Optimizer<Scalar> optimizer(config.optimizer);
    ForwardOptions<Scalar> options{config.surrogate, config.checked};
    std::vector<LossReport> history;

    for (Index epoch = first_epoch; epoch < first_epoch + config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        if (config.lr_step_epochs > 0) {
            const auto decays = (epoch - 1) / config.lr_step_epochs;
            optimizer.set_learning_rate(config.optimizer.learning_rate *
                                        std::pow(config.lr_gamma, static_cast<double>(decays)));
        }
        LossReport report;
        report.epoch = epoch;
        report.n_classes = classes;
        report.per_class_correct.assign(static_cast<std::size_t>(classes), 0);
        report.per_class_total.assign(static_cast<std::size_t>(classes), 0);

        const auto order = epoch_permutation(data.size(), config.seed, epoch);
        double loss_sum = 0.0;
        Index correct = 0;
        for (Index first = 0; first < data.size(); first += config.batch_size) {
            const Index count = std::min(config.batch_size, data.size() - first);
            const std::span<const Index> idx(order.data() + first, static_cast<std::size_t>(count));
            const Tensor<Scalar> x = data.gather(idx);
            const std::vector<int> y = data.gather_labels(idx);

            const auto fwd = network_forward(x, net, config.time_steps, options);
            const auto ce = cross_entropy(fwd.class_scores, y);
            if (config.checked && !std::isfinite(ce.loss)) throw NumericError("training loss is not finite");
            const auto grads = stbp_backward(fwd, ce.grad_scores, net, config.surrogate);
            optimizer.step(net, grads);

            loss_sum += ce.loss * static_cast<double>(count);
            const auto pred = predict_classes(fwd.class_scores);
            for (std::size_t i = 0; i < y.size(); ++i) {
                ++report.per_class_total[static_cast<std::size_t>(y[i])];
                if (pred[i] == y[i]) {
                    ++correct;
                    ++report.per_class_correct[static_cast<std::size_t>(y[i])];
                }
            }
        }
        report.n_samples = data.size();
        report.loss = loss_sum / static_cast<double>(data.size());
        report.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        history.push_back(report);
        if (on_epoch && !on_epoch(report, net)) break;
    }
    return history;
}

struct Evaluation {
    std::vector<int> predictions;
    ConfusionMatrix confusion;
    MetricsReport metrics;
};

/// Forward-only pass in batches; predictions are argmax(class_scores) with
/// lowest-index tie-break. Never modifies the network.
template <typename Scalar>
Evaluation evaluate(const TensorDataset<Scalar>& data, const Network<Scalar>& net, Index batch_size = 64,
                    const SurrogateSpec& surrogate = {}) {
    if (data.size() == 0) throw InputError("evaluation set is empty");
    if (batch_size < 1) throw InputError("batch_size must be at least 1");
    Evaluation out{{}, ConfusionMatrix(static_cast<int>(net.config().classes)), {}};
    std::vector<Index> idx;
    for (Index first = 0; first < data.size(); first += batch_size) {
        const Index count = std::min(batch_size, data.size() - first);
        idx.resize(static_cast<std::size_t>(count));
        std::iota(idx.begin(), idx.end(), first);
        const auto fwd = network_forward(data.gather(idx), net, ForwardOptions<Scalar>{surrogate, false});
        const auto pred = predict_classes(fwd.class_scores);
        out.predictions.insert(out.predictions.end(), pred.begin(), pred.end());
    }
    out.confusion = confusion(data.labels, out.predictions, static_cast<int>(net.config().classes));
    out.metrics = per_class_stats(out.confusion);
    return out;
}

}  // namespace w2s
