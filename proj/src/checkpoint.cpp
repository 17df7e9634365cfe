#include "w2s/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace w2s {

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void index(Index v) {
        if (v < 0 || v > static_cast<Index>(0xffffffffu)) throw InputError("extent does not fit in u32");
        u32(static_cast<std::uint32_t>(v));
    }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    std::size_t offset() const { return pos_; }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated checkpoint ") + what, pos_);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

bool same_architecture(const NetworkConfig& a, const NetworkConfig& b) {
    return a.input_size == b.input_size && a.input_channels == b.input_channels &&
           a.encoder_channels == b.encoder_channels && a.encoder_kernel == b.encoder_kernel && a.convs == b.convs &&
           a.fc_units == b.fc_units && a.classes == b.classes && a.time_steps == b.time_steps;
}

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net, std::uint32_t epoch) {
    const auto& cfg = net.config();
    const auto layers = cfg.describe();
    Writer w;
    for (char c : {'W', '2', 'S', '1'}) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kVersion);
    w.u32(epoch);
    w.index(cfg.time_steps);
    w.f32(static_cast<float>(cfg.v_thr));
    w.f32(static_cast<float>(cfg.v_reset));
    w.index(static_cast<Index>(layers.size()));
    for (const auto& d : layers) {
        std::vector<Index> ints;
        switch (d.kind) {
            case LayerKind::Encoder:
                ints = {d.neuron_shape[0], d.input_shape[0], d.kernel_h, d.kernel_w, d.stride, d.padding,
                        d.input_shape[1]};
                break;
            case LayerKind::SpikingConv:
                ints = {d.neuron_shape[0], d.input_shape[0], d.kernel_h, d.kernel_w, d.stride, d.padding};
                break;
            case LayerKind::SpikingFc: ints = {d.neuron_shape[0], d.input_shape[0]}; break;
            case LayerKind::Output: ints = {d.neuron_shape[0], d.input_shape[0], cfg.time_steps}; break;
        }
        w.u8(static_cast<std::uint8_t>(d.kind));
        w.u8(static_cast<std::uint8_t>(ints.size()));
        for (Index v : ints) w.index(v);
    }
    const auto params = net.parameters();
    w.index(static_cast<Index>(params.size()));
    for (const auto* t : params) {
        w.u8(static_cast<std::uint8_t>(t->rank()));
        for (Index d : t->shape()) w.index(d);
        for (float v : t->values()) w.f32(v);
    }
    return std::move(w.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8("magic"));
    if (std::memcmp(magic, "W2S1", 4) != 0) throw FormatError("bad magic, expected W2S1", 0);
    const std::size_t version_at = r.offset();
    if (r.u32("version") != kVersion) throw FormatError("unsupported checkpoint version", version_at);

    Checkpoint ck;
    ck.epoch = r.u32("epoch");
    NetworkConfig cfg;
    cfg.convs.clear();
    cfg.time_steps = r.u32("time steps");
    cfg.v_thr = r.f32("v_thr");
    cfg.v_reset = r.f32("v_reset");
    const std::uint32_t n_layers = r.u32("layer count");
    bool saw_encoder = false, saw_fc = false, saw_output = false;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::size_t at = r.offset();
        const auto kind = static_cast<LayerKind>(r.u8("layer tag"));
        const std::uint8_t n = r.u8("descriptor length");
        std::vector<Index> ints;
        for (std::uint8_t k = 0; k < n; ++k) ints.push_back(static_cast<Index>(r.u32("descriptor")));
        auto expect = [&](std::size_t len) {
            if (ints.size() != len) throw FormatError("layer descriptor has wrong length", at);
        };
        switch (kind) {
            case LayerKind::Encoder:
                expect(7);
                if (saw_encoder || i != 0) throw FormatError("encoder must be the first layer", at);
                if (ints[2] != ints[3] || ints[4] != 1 || ints[5] != 0) {
                    throw FormatError("encoder must use a square kernel, stride 1, no padding", at);
                }
                cfg.encoder_channels = ints[0];
                cfg.input_channels = ints[1];
                cfg.encoder_kernel = ints[2];
                cfg.input_size = ints[6];
                saw_encoder = true;
                break;
            case LayerKind::SpikingConv:
                expect(6);
                if (!saw_encoder || saw_fc) throw FormatError("spiking conv out of order", at);
                if (ints[2] != ints[3]) throw FormatError("spiking conv kernels must be square", at);
                cfg.convs.push_back({ints[0], ints[2], ints[4], ints[5]});
                break;
            case LayerKind::SpikingFc:
                expect(2);
                if (!saw_encoder || saw_fc) throw FormatError("spiking fc out of order", at);
                cfg.fc_units = ints[0];
                saw_fc = true;
                break;
            case LayerKind::Output:
                expect(3);
                if (!saw_fc || saw_output) throw FormatError("output layer out of order", at);
                cfg.classes = ints[0];
                if (ints[2] != cfg.time_steps) throw FormatError("output layer T disagrees with header", at);
                saw_output = true;
                break;
            default: throw FormatError("unknown layer tag", at);
        }
    }
    if (!saw_output) throw FormatError("checkpoint lacks an output layer", r.offset());

    try {
        ck.network = Network<float>(cfg, 0);
    } catch (const Error& e) {
        throw FormatError(std::string("inconsistent layer descriptors: ") + e.what(), 0);
    }
    auto params = ck.network.parameters();
    const std::size_t count_at = r.offset();
    if (r.u32("tensor count") != params.size()) throw FormatError("tensor count does not match layers", count_at);
    for (auto& p : params) {
        const std::size_t at = r.offset();
        const std::uint8_t rank = r.u8("tensor rank");
        Shape shape;
        for (std::uint8_t k = 0; k < rank; ++k) shape.push_back(static_cast<Index>(r.u32("tensor extent")));
        if (shape != p.tensor->shape()) {
            throw FormatError("tensor " + p.name + " has shape " + to_string(shape) + ", expected " +
                                  to_string(p.tensor->shape()),
                              at);
        }
        for (float& v : p.tensor->values()) v = r.f32("tensor data");
    }
    if (!r.done()) throw FormatError("trailing bytes after last tensor", r.offset());
    ck.network.sync_constants();
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net, std::uint32_t epoch) {
    const auto bytes = encode_checkpoint(net, epoch);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

}  // namespace w2s
