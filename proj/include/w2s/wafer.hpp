#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "w2s/tensor.hpp"
#include "w2s/training.hpp"

namespace w2s {

/// Frozen class order; serialized labels are these integers.
enum class ClassLabel : std::uint8_t {
    NoPattern = 0,
    Center = 1,
    Donut = 2,
    EdgeLoc = 3,
    EdgeRing = 4,
    Local = 5,
    Random = 6,
    Scratch = 7,
    NearFull = 8,
};

inline constexpr int kNumClasses = 9;
inline constexpr int kWaferSize = 36;

std::string_view class_name(ClassLabel label);
const std::vector<std::string>& class_names();
/// Accepts a class name (case-insensitive, '-' and '_' ignored) or its index.
ClassLabel parse_class(std::string_view text);
ClassLabel label_from_int(int value);

enum class Provenance : std::uint8_t { Real, Synthetic, Augmented };

/// The eight symmetries of a rectangular grid. Rotations are clockwise.
enum class D4 : std::uint8_t {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipHorizontal,  // mirror left-right
    FlipVertical,    // mirror top-bottom
    Transpose,       // main diagonal
    AntiTranspose,   // anti-diagonal
};

inline constexpr std::array<D4, 8> kD4All{D4::Identity,       D4::Rot90,        D4::Rot180,    D4::Rot270,
                                          D4::FlipHorizontal, D4::FlipVertical, D4::Transpose, D4::AntiTranspose};

D4 inverse(D4 t);
std::string_view d4_name(D4 t);

/// Grid of die codes: 0 no die, 1 operational, 2 defective.
struct WaferMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> cells;  // row-major
    ClassLabel label = ClassLabel::NoPattern;
    Provenance provenance = Provenance::Real;
    // Set on augmented maps: which source map and symmetry produced them.
    std::int64_t source_index = -1;
    D4 transform = D4::Identity;

    WaferMap() = default;
    WaferMap(int h, int w, ClassLabel l, std::uint8_t fill = 0);

    std::uint8_t at(int r, int c) const { return cells[static_cast<std::size_t>(r * width + c)]; }
    std::uint8_t& at(int r, int c) { return cells[static_cast<std::size_t>(r * width + c)]; }

    /// Throws InputError on non-positive extents, wrong cell count, or codes outside {0,1,2}.
    void validate() const;

    bool same_grid(const WaferMap& o) const { return height == o.height && width == o.width && cells == o.cells; }
};

struct Dataset {
    std::vector<WaferMap> maps;
    Provenance provenance = Provenance::Real;

    std::size_t size() const { return maps.size(); }
    bool empty() const { return maps.empty(); }
    std::array<std::size_t, kNumClasses> class_counts() const;
};

// --- WFM1 container ---------------------------------------------------------
// "WFM1", u32 count, then per record: u16 height, u16 width, u8 label,
// height*width bytes of cell codes. Little-endian.

std::vector<std::uint8_t> encode_wfm(const Dataset& data);
Dataset decode_wfm(std::span<const std::uint8_t> bytes);
void save_wfm(const std::filesystem::path& path, const Dataset& data);
Dataset load_wfm(const std::filesystem::path& path);

/// CSV rows "height,width,label,cells" where cells is height*width digits
/// (row-major) and label is a class index or name. Blank lines, '#' comments
/// and a leading "height,..." header are skipped.
Dataset parse_csv(std::istream& in);
Dataset import_csv(const std::filesystem::path& path);

// --- Preprocessing ------------------------------------------------------------

/// Nearest-neighbour resampling: src = floor(dst * src_extent / size).
WaferMap resize_nearest(const WaferMap& map, int size = kWaferSize);

/// Codes 0/1/2 map to 0.0/0.5/1.0.
template <typename Scalar = float>
Tensor<Scalar> normalize(const WaferMap& map) {
    if (map.height != kWaferSize || map.width != kWaferSize) {
        throw DimensionError("normalize expects a " + std::to_string(kWaferSize) + "x" + std::to_string(kWaferSize) +
                             " map, got " + std::to_string(map.height) + "x" + std::to_string(map.width));
    }
    Tensor<Scalar> out({1, kWaferSize, kWaferSize});
    for (std::size_t i = 0; i < map.cells.size(); ++i) out.data()[i] = Scalar(map.cells[i]) * Scalar(0.5);
    return out;
}

/// Inverse of normalize; throws InputError on values other than 0, 0.5, 1.
WaferMap denormalize(const Tensor<float>& tensor, ClassLabel label);

/// Resizes (if needed) and normalizes every map into an (N,1,36,36) tensor.
template <typename Scalar = float>
TensorDataset<Scalar> to_tensor_dataset(const Dataset& data) {
    if (data.empty()) throw InputError("dataset is empty");
    TensorDataset<Scalar> out{Tensor<Scalar>({static_cast<Index>(data.size()), 1, kWaferSize, kWaferSize}), {}};
    const Index per = kWaferSize * kWaferSize;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const WaferMap& m = data.maps[i];
        const Tensor<Scalar> t = (m.height == kWaferSize && m.width == kWaferSize)
                                     ? normalize<Scalar>(m)
                                     : normalize<Scalar>(resize_nearest(m));
        std::copy_n(t.data(), per, out.inputs.data() + static_cast<Index>(i) * per);
        out.labels.push_back(static_cast<int>(m.label));
    }
    return out;
}

// --- Splits -------------------------------------------------------------------

struct SplitSpec {
    std::vector<double> ratios{0.8, 0.2};
    std::uint64_t seed = 0;
    bool stratified = true;

    void validate() const;
};

/// Floor-based part sizes; the remainder goes to the first part.
std::vector<std::size_t> split_sizes(std::size_t n, std::span<const double> ratios);

/// Seeded shuffle then partition. Stratified splits apply split_sizes per class.
std::vector<Dataset> split(const Dataset& data, const SplitSpec& spec);

// --- Augmentation -------------------------------------------------------------

WaferMap apply_transform(const WaferMap& map, D4 t);

struct AugmentOptions {
    std::map<ClassLabel, std::size_t> targets;
    std::uint64_t seed = 0;
    // When a class needs more images than 7 x templates, either reuse
    // (template, transform) pairs or fail.
    bool allow_repeats = false;
};

struct AugmentResult {
    Dataset data;
    std::vector<std::string> warnings;
};

/// Grows each listed class to its target by applying non-identity D4 symmetries
/// to randomly chosen non-augmented templates of that class. Originals are kept
/// unchanged and first; new maps are appended and tagged Augmented.
AugmentResult augment_minority(const Dataset& data, const AugmentOptions& options);

// --- Synthetic generator ------------------------------------------------------

/// Knobs of the parametric pattern generator (grid is always 36x36).
struct SyntheticParams {
    double center_radius_min = 4.5;
    double center_radius_max = 7.0;
    double max_background_density = 0.004;  // stray defects on patterned maps
    double no_pattern_max_density = 0.02;
};

/// counts[c] maps of class c, class-major order. Map i draws from its own
/// generator seeded with mix(seed, i), so output is a pure function of the seed.
Dataset generate_synthetic(std::span<const std::size_t> counts, std::uint64_t seed, const SyntheticParams& params = {});
Dataset generate_synthetic(std::size_t per_class, std::uint64_t seed, const SyntheticParams& params = {});

/// SplitMix64 finalizer, used to derive per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace w2s
