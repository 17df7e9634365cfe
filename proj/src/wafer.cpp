#include "w2s/wafer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace w2s {

namespace {

const std::vector<std::string> kNames{"NoPattern", "Center",  "Donut",  "EdgeLoc", "EdgeRing",
                                      "Local",     "Random", "Scratch", "NearFull"};

std::string fold(std::string_view s) {
    std::string out;
    for (char ch : s) {
        if (ch == '-' || ch == '_' || ch == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    return out;
}

}  // namespace

std::string_view class_name(ClassLabel label) { return kNames.at(static_cast<std::size_t>(label)); }

const std::vector<std::string>& class_names() { return kNames; }

ClassLabel label_from_int(int value) {
    if (value < 0 || value >= kNumClasses) {
        throw InputError("class label " + std::to_string(value) + " outside [0," + std::to_string(kNumClasses) + ")");
    }
    return static_cast<ClassLabel>(value);
}

ClassLabel parse_class(std::string_view text) {
    const std::string key = fold(text);
    if (!key.empty() && std::all_of(key.begin(), key.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        return label_from_int(std::stoi(key));
    }
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (fold(kNames[i]) == key) return static_cast<ClassLabel>(i);
    }
    if (key == "none") return ClassLabel::NoPattern;
    throw InputError("unknown class '" + std::string(text) + "'");
}

D4 inverse(D4 t) {
    switch (t) {
        case D4::Rot90: return D4::Rot270;
        case D4::Rot270: return D4::Rot90;
        default: return t;
    }
}

std::string_view d4_name(D4 t) {
    static constexpr std::array<std::string_view, 8> names{"identity", "rot90",     "rot180",    "rot270",
                                                           "flip_h",   "flip_v",    "transpose", "anti_transpose"};
    return names[static_cast<std::size_t>(t)];
}

WaferMap::WaferMap(int h, int w, ClassLabel l, std::uint8_t fill)
    : height(h), width(w), cells(static_cast<std::size_t>(std::max(h, 0) * std::max(w, 0)), fill), label(l) {}

void WaferMap::validate() const {
    if (height <= 0 || width <= 0) throw InputError("wafer map extents must be positive");
    if (cells.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        throw InputError("wafer map cell count does not match its extents");
    }
    for (std::uint8_t c : cells) {
        if (c > 2) throw InputError("wafer map cell code " + std::to_string(c) + " outside {0,1,2}");
    }
    label_from_int(static_cast<int>(label));
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& m : maps) ++counts[static_cast<std::size_t>(m.label)];
    return counts;
}

// ---------------------------------------------------------------------------
// WFM1

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xffu));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what, pos_);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_wfm(const Dataset& data) {
    std::vector<std::uint8_t> out{'W', 'F', 'M', '1'};
    if (data.size() > 0xffffffffu) throw InputError("too many maps for WFM1");
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    for (const auto& m : data.maps) {
        m.validate();
        if (m.height > 0xffff || m.width > 0xffff) throw InputError("wafer map too large for WFM1");
        put_u16(out, static_cast<std::uint16_t>(m.height));
        put_u16(out, static_cast<std::uint16_t>(m.width));
        out.push_back(static_cast<std::uint8_t>(m.label));
        out.insert(out.end(), m.cells.begin(), m.cells.end());
    }
    return out;
}

Dataset decode_wfm(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.take(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), "WFM1")) throw FormatError("bad magic, expected WFM1", 0);
    const std::uint32_t count = r.u32("record count");
    Dataset data;
    data.maps.reserve(std::min<std::size_t>(count, bytes.size() / 5 + 1));
    for (std::uint32_t i = 0; i < count; ++i) {
        WaferMap m;
        m.height = r.u16("height");
        m.width = r.u16("width");
        if (m.height == 0 || m.width == 0) throw FormatError("zero map extent", r.offset() - 4);
        const std::size_t label_at = r.offset();
        const std::uint8_t label = r.u8("label");
        if (label >= kNumClasses) throw FormatError("label " + std::to_string(label) + " outside [0,9)", label_at);
        m.label = static_cast<ClassLabel>(label);
        const std::size_t cells_at = r.offset();
        const auto cells = r.take(static_cast<std::size_t>(m.height) * static_cast<std::size_t>(m.width), "cells");
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (cells[k] > 2) {
                throw FormatError("cell code " + std::to_string(cells[k]) + " outside {0,1,2}", cells_at + k);
            }
        }
        m.cells.assign(cells.begin(), cells.end());
        data.maps.push_back(std::move(m));
    }
    if (r.offset() != bytes.size()) throw FormatError("trailing bytes after last record", r.offset());
    return data;
}

void save_wfm(const std::filesystem::path& path, const Dataset& data) {
    const auto bytes = encode_wfm(data);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_wfm(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    return decode_wfm(read_file(path));
}

// ---------------------------------------------------------------------------
// CSV

Dataset parse_csv(std::istream& in) {
    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (data.maps.empty() && line.rfind("height", 0) == 0) continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        auto fail = [&](const std::string& why) {
            throw FormatError("CSV line " + std::to_string(line_no) + ": " + why, line_start);
        };
        if (fields.size() != 4) fail("expected 4 fields (height,width,label,cells)");
        WaferMap m;
        try {
            m.height = std::stoi(fields[0]);
            m.width = std::stoi(fields[1]);
            m.label = parse_class(fields[2]);
        } catch (const std::exception& e) {
            fail(e.what());
        }
        if (m.height <= 0 || m.width <= 0) fail("extents must be positive");
        const std::string& cells = fields[3];
        if (cells.size() != static_cast<std::size_t>(m.height) * static_cast<std::size_t>(m.width)) {
            fail("expected " + std::to_string(m.height * m.width) + " cell digits, got " + std::to_string(cells.size()));
        }
        m.cells.reserve(cells.size());
        for (char ch : cells) {
            if (ch < '0' || ch > '2') fail(std::string("cell code '") + ch + "' outside {0,1,2}");
            m.cells.push_back(static_cast<std::uint8_t>(ch - '0'));
        }
        data.maps.push_back(std::move(m));
    }
    return data;
}

Dataset import_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_csv(in);
}

// ---------------------------------------------------------------------------
// Preprocessing

WaferMap resize_nearest(const WaferMap& map, int size) {
    map.validate();
    if (size <= 0) throw InputError("target size must be positive");
    WaferMap out(size, size, map.label);
    out.provenance = map.provenance;
    out.source_index = map.source_index;
    out.transform = map.transform;
    for (int r = 0; r < size; ++r) {
        const int sr = static_cast<int>(static_cast<std::int64_t>(r) * map.height / size);
        for (int c = 0; c < size; ++c) {
            const int sc = static_cast<int>(static_cast<std::int64_t>(c) * map.width / size);
            out.at(r, c) = map.at(sr, sc);
        }
    }
    return out;
}

WaferMap denormalize(const Tensor<float>& tensor, ClassLabel label) {
    if (tensor.size() != kWaferSize * kWaferSize) throw DimensionError("denormalize expects 36x36 values");
    WaferMap m(kWaferSize, kWaferSize, label);
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        const float v = tensor.data()[i];
        if (v == 0.0f) {
            m.cells[i] = 0;
        } else if (v == 0.5f) {
            m.cells[i] = 1;
        } else if (v == 1.0f) {
            m.cells[i] = 2;
        } else {
            throw InputError("value " + std::to_string(v) + " is not a normalized wafer code");
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Splits

void SplitSpec::validate() const {
    if (ratios.empty() || ratios.size() > 3) throw InputError("split needs 1 to 3 ratios");
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw InputError("split ratios must be positive");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError("split ratios must sum to 1");
}

std::vector<std::size_t> split_sizes(std::size_t n, std::span<const double> ratios) {
    std::vector<std::size_t> sizes(ratios.size(), 0);
    std::size_t assigned = 0;
    for (std::size_t i = 1; i < ratios.size(); ++i) {
        // The epsilon absorbs representation error, e.g. 0.2 * 172950.
        sizes[i] = static_cast<std::size_t>(std::floor(ratios[i] * static_cast<double>(n) + 1e-7));
        assigned += sizes[i];
    }
    if (assigned > n) throw InputError("split ratios over-allocate the dataset");
    if (!sizes.empty()) sizes[0] = n - assigned;
    return sizes;
}

std::vector<Dataset> split(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::vector<std::vector<std::size_t>> parts(spec.ratios.size());

    auto distribute = [&](std::vector<std::size_t> indices) {
        std::shuffle(indices.begin(), indices.end(), rng);
        const auto sizes = split_sizes(indices.size(), spec.ratios);
        std::size_t at = 0;
        for (std::size_t p = 0; p < sizes.size(); ++p) {
            parts[p].insert(parts[p].end(), indices.begin() + static_cast<std::ptrdiff_t>(at),
                            indices.begin() + static_cast<std::ptrdiff_t>(at + sizes[p]));
            at += sizes[p];
        }
    };

    if (spec.stratified) {
        std::array<std::vector<std::size_t>, kNumClasses> by_class;
        for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.maps[i].label)].push_back(i);
        for (auto& indices : by_class) distribute(std::move(indices));
        for (auto& p : parts) std::shuffle(p.begin(), p.end(), rng);
    } else {
        std::vector<std::size_t> all(data.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        distribute(std::move(all));
    }

    std::vector<Dataset> out(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
        out[p].provenance = data.provenance;
        out[p].maps.reserve(parts[p].size());
        for (std::size_t i : parts[p]) out[p].maps.push_back(data.maps[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// D4 augmentation

WaferMap apply_transform(const WaferMap& map, D4 t) {
    const int h = map.height;
    const int w = map.width;
    const bool swap = t == D4::Rot90 || t == D4::Rot270 || t == D4::Transpose || t == D4::AntiTranspose;
    WaferMap out(swap ? w : h, swap ? h : w, map.label);
    out.provenance = map.provenance;
    out.source_index = map.source_index;
    out.transform = map.transform;
    for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
            int sr = r;
            int sc = c;
            switch (t) {
                case D4::Identity: break;
                case D4::Rot90: sr = h - 1 - c; sc = r; break;
                case D4::Rot180: sr = h - 1 - r; sc = w - 1 - c; break;
                case D4::Rot270: sr = c; sc = w - 1 - r; break;
                case D4::FlipHorizontal: sc = w - 1 - c; break;
                case D4::FlipVertical: sr = h - 1 - r; break;
                case D4::Transpose: sr = c; sc = r; break;
                case D4::AntiTranspose: sr = h - 1 - c; sc = w - 1 - r; break;
            }
            out.at(r, c) = map.at(sr, sc);
        }
    }
    return out;
}

AugmentResult augment_minority(const Dataset& data, const AugmentOptions& options) {
    AugmentResult result{data, {}};
    const auto counts = data.class_counts();
    std::mt19937_64 rng(options.seed);
    for (const auto& [label, target] : options.targets) {
        const auto c = static_cast<std::size_t>(label);
        if (target < counts[c]) {
            throw InputError("target " + std::to_string(target) + " for " + std::string(class_name(label)) +
                             " is below its current count " + std::to_string(counts[c]));
        }
        const std::size_t need = target - counts[c];
        if (need == 0) continue;

        std::vector<std::size_t> templates;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.maps[i].label == label && data.maps[i].provenance != Provenance::Augmented) templates.push_back(i);
        }
        if (templates.empty()) {
            throw InputError("class " + std::string(class_name(label)) + " has no templates to augment");
        }
        // Every distinct (template, non-identity symmetry) pair, in random order.
        std::vector<std::pair<std::size_t, D4>> pairs;
        for (std::size_t i : templates) {
            for (std::size_t k = 1; k < kD4All.size(); ++k) pairs.emplace_back(i, kD4All[k]);
        }
        std::shuffle(pairs.begin(), pairs.end(), rng);
        if (need > pairs.size()) {
            if (!options.allow_repeats) {
                throw InputError("class " + std::string(class_name(label)) + " needs " + std::to_string(need) +
                                 " new maps but only " + std::to_string(pairs.size()) +
                                 " distinct symmetric images exist");
            }
            result.warnings.push_back("class " + std::string(class_name(label)) + ": reusing template/symmetry pairs (" +
                                      std::to_string(need) + " needed, " + std::to_string(pairs.size()) +
                                      " distinct)");
        }
        for (std::size_t k = 0; k < need; ++k) {
            const auto& [src, t] = pairs[k % pairs.size()];
            WaferMap m = apply_transform(data.maps[src], t);
            m.provenance = Provenance::Augmented;
            m.source_index = static_cast<std::int64_t>(src);
            m.transform = t;
            result.data.maps.push_back(std::move(m));
        }
    }
    if (result.data.size() != data.size()) result.data.provenance = Provenance::Augmented;
    return result;
}

// ---------------------------------------------------------------------------
// Synthetic generator

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

namespace {

constexpr double kCentre = kWaferSize / 2.0;
constexpr double kRadius = kWaferSize / 2.0;

struct Cell {
    double dist;   // from grid centre
    double angle;  // radians in (-pi, pi]
    double y, x;   // cell centre
};

Cell cell_geometry(int r, int c) {
    const double y = r + 0.5 - kCentre;
    const double x = c + 0.5 - kCentre;
    return {std::hypot(y, x), std::atan2(y, x), y, x};
}

double angle_gap(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
    return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

// Distance from point p to segment ab.
double segment_distance(double py, double px, double ay, double ax, double by, double bx) {
    const double dy = by - ay;
    const double dx = bx - ax;
    const double len2 = dy * dy + dx * dx;
    double t = len2 > 0 ? ((py - ay) * dy + (px - ax) * dx) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(py - (ay + t * dy), px - (ax + t * dx));
}

WaferMap synth_one(ClassLabel label, std::mt19937_64& rng, const SyntheticParams& p) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const double two_pi = 2.0 * std::numbers::pi;

    WaferMap m(kWaferSize, kWaferSize, label);
    m.provenance = Provenance::Synthetic;

    double noise = uniform(0.0, p.max_background_density);
    // Pattern membership test and its fill density.
    std::function<bool(const Cell&)> inside = [](const Cell&) { return false; };
    double noise_reach = kRadius;  // stray defects only land within this distance of the centre
    double density = uniform(0.85, 1.0);

    switch (label) {
        case ClassLabel::NoPattern:
            noise = uniform(0.0, p.no_pattern_max_density);
            break;
        case ClassLabel::Center: {
            const double radius = uniform(p.center_radius_min, p.center_radius_max);
            const double oy = uniform(-1.0, 1.0);
            const double ox = uniform(-1.0, 1.0);
            inside = [=](const Cell& c) { return std::hypot(c.y - oy, c.x - ox) <= radius; };
            // a small blob plus a few far strays would break the 90%-within-9 guarantee
            noise_reach = 9.0;
            break;
        }
        case ClassLabel::Donut: {
            const double inner = uniform(5.0, 8.0);
            const double outer = inner + uniform(3.0, 5.0);
            inside = [=](const Cell& c) { return c.dist >= inner && c.dist <= outer; };
            break;
        }
        case ClassLabel::EdgeLoc: {
            const double band = uniform(3.0, 5.0);
            const double centre = uniform(-std::numbers::pi, std::numbers::pi);
            const double half_span = uniform(15.0, 37.5) * std::numbers::pi / 180.0;
            inside = [=](const Cell& c) {
                return c.dist >= kRadius - band && angle_gap(c.angle, centre) <= half_span;
            };
            break;
        }
        case ClassLabel::EdgeRing: {
            const double band = uniform(2.0, 3.5);
            inside = [=](const Cell& c) { return c.dist >= kRadius - band; };
            break;
        }
        case ClassLabel::Local: {
            const double radius = uniform(2.5, 4.5);
            const double at = uniform(5.0, 12.0);
            const double theta = uniform(0.0, two_pi);
            const double cy = at * std::sin(theta);
            const double cx = at * std::cos(theta);
            inside = [=](const Cell& c) { return std::hypot(c.y - cy, c.x - cx) <= radius; };
            break;
        }
        case ClassLabel::Random:
            noise = 0.0;
            density = uniform(0.12, 0.35);
            inside = [](const Cell&) { return true; };
            break;
        case ClassLabel::Scratch: {
            const double at = uniform(0.0, 10.0);
            const double theta = uniform(0.0, two_pi);
            const double dir = uniform(0.0, std::numbers::pi);
            const double half_len = uniform(6.0, 13.0);
            const double half_width = uniform(0.5, 1.0);
            const double cy = at * std::sin(theta);
            const double cx = at * std::cos(theta);
            const double ay = cy - half_len * std::sin(dir), ax = cx - half_len * std::cos(dir);
            const double by = cy + half_len * std::sin(dir), bx = cx + half_len * std::cos(dir);
            density = uniform(0.9, 1.0);
            inside = [=](const Cell& c) { return segment_distance(c.y, c.x, ay, ax, by, bx) <= half_width; };
            break;
        }
        case ClassLabel::NearFull:
            noise = 0.0;
            density = uniform(0.8, 0.95);
            inside = [](const Cell&) { return true; };
            break;
    }

    for (int r = 0; r < kWaferSize; ++r) {
        for (int c = 0; c < kWaferSize; ++c) {
            const Cell cell = cell_geometry(r, c);
            if (cell.dist > kRadius) continue;  // outside the inscribed disc: no die
            // Two draws per die regardless of branch keep the stream aligned.
            const double a = unit(rng);
            const double b = unit(rng);
            const bool defect = (inside(cell) && a < density) || (b < noise && cell.dist <= noise_reach);
            m.at(r, c) = defect ? 2 : 1;
        }
    }
    return m;
}

}  // namespace

Dataset generate_synthetic(std::span<const std::size_t> counts, std::uint64_t seed, const SyntheticParams& params) {
    if (counts.size() != kNumClasses) throw InputError("synthetic generator needs one count per class");
    Dataset data;
    data.provenance = Provenance::Synthetic;
    std::uint64_t index = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t k = 0; k < counts[static_cast<std::size_t>(c)]; ++k) {
            std::mt19937_64 rng(mix_seed(seed, index++));
            data.maps.push_back(synth_one(static_cast<ClassLabel>(c), rng, params));
        }
    }
    return data;
}

Dataset generate_synthetic(std::size_t per_class, std::uint64_t seed, const SyntheticParams& params) {
    std::array<std::size_t, kNumClasses> counts{};
    counts.fill(per_class);
    return generate_synthetic(counts, seed, params);
}

}  // namespace w2s
