#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "w2s/errors.hpp"

namespace w2s {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline std::string to_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

inline Index shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense row-major N-dimensional array. The shape is fixed at construction;
/// element storage is an Eigen vector so whole-tensor arithmetic can go
/// through Eigen expressions via vec() and matrix().
template <typename Scalar>
class Tensor {
public:
    using scalar_type = Scalar;
    using VectorMap = Eigen::Map<Vector<Scalar>>;
    using ConstVectorMap = Eigen::Map<const Vector<Scalar>>;
    using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
    using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

    Tensor() = default;

    explicit Tensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
        validate_shape();
        data_ = Vector<Scalar>::Constant(shape_size(shape_), fill);
    }

    Tensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != shape_size(shape_)) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + to_string(shape_));
        }
    }

    Tensor(Shape shape, std::initializer_list<Scalar> values)
        : Tensor(std::move(shape), Vector<Scalar>(Eigen::Map<const Vector<Scalar>>(
                                       values.begin(), static_cast<Index>(values.size())))) {}

    const Shape& shape() const noexcept { return shape_; }
    Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
    Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    Index size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return shape_.empty(); }

    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }

    std::span<Scalar> values() noexcept { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
    std::span<const Scalar> values() const noexcept {
        return {data_.data(), static_cast<std::size_t>(data_.size())};
    }

    // Non-resizable views; the storage length is tied to the shape.
    VectorMap vec() noexcept { return VectorMap(data_.data(), data_.size()); }
    ConstVectorMap vec() const noexcept { return ConstVectorMap(data_.data(), data_.size()); }

    MatrixMap matrix(Index rows, Index cols) {
        check_matrix(rows, cols);
        return MatrixMap(data_.data(), rows, cols);
    }
    ConstMatrixMap matrix(Index rows, Index cols) const {
        check_matrix(rows, cols);
        return ConstMatrixMap(data_.data(), rows, cols);
    }

    // Leading axis as rows, everything else flattened into columns.
    MatrixMap matrix() { return matrix(leading(), size() / std::max<Index>(leading(), 1)); }
    ConstMatrixMap matrix() const { return matrix(leading(), size() / std::max<Index>(leading(), 1)); }

    template <typename... Idx>
    Scalar& operator()(Idx... idx) {
        return data_[offset({static_cast<Index>(idx)...})];
    }
    template <typename... Idx>
    const Scalar& operator()(Idx... idx) const {
        return data_[offset({static_cast<Index>(idx)...})];
    }

    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != size()) {
            throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
        }
        return Tensor(std::move(shape), data_);
    }

    template <typename Other>
    Tensor<Other> cast() const {
        return Tensor<Other>(shape_, data_.template cast<Other>().eval());
    }

    void set_zero() { data_.setZero(); }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && std::equal(a.values().begin(), a.values().end(), b.values().begin());
    }

private:
    Index leading() const { return shape_.empty() ? 0 : shape_.front(); }

    void validate_shape() const {
        for (Index d : shape_) {
            if (d <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape_));
        }
    }

    void check_matrix(Index rows, Index cols) const {
        if (rows * cols != size()) {
            throw DimensionError("cannot view " + to_string(shape_) + " as " + std::to_string(rows) + "x" +
                                 std::to_string(cols));
        }
    }

    Index offset(std::initializer_list<Index> idx) const {
        if (static_cast<Index>(idx.size()) != rank()) {
            throw DimensionError("index rank mismatch for tensor " + to_string(shape_));
        }
        Index flat = 0;
        std::size_t axis = 0;
        for (Index i : idx) {
            flat = flat * shape_[axis] + i;
            ++axis;
        }
        return flat;
    }

    Shape shape_;
    Vector<Scalar> data_;
};

// ---------------------------------------------------------------------------
// Convolution

/// Output extent of a strided, zero-padded correlation along one axis.
inline Index conv_output_extent(Index input, Index kernel, Index stride, Index padding) {
    if (stride <= 0 || padding < 0) {
        throw GeometryError("stride must be positive and padding non-negative");
    }
    const Index span = input + 2 * padding - kernel;
    if (span < 0) {
        throw GeometryError("kernel extent " + std::to_string(kernel) + " exceeds padded input extent " +
                            std::to_string(input + 2 * padding));
    }
    return span / stride + 1;
}

namespace detail {

struct ConvGeometry {
    Index batch, depth, height, width;
    Index channels, kernel_h, kernel_w;
    Index out_h, out_w;
    Index stride, padding;

    Index patch() const { return depth * kernel_h * kernel_w; }
    Index out_area() const { return out_h * out_w; }
    Index in_volume() const { return depth * height * width; }
};

template <typename Scalar>
ConvGeometry conv_geometry(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel, Index stride, Index padding) {
    if (input.rank() != 4 || kernel.rank() != 4) {
        throw DimensionError("conv2d expects rank-4 input and kernel, got " + to_string(input.shape()) + " and " +
                             to_string(kernel.shape()));
    }
    if (input.dim(1) != kernel.dim(1)) {
        throw DimensionError("conv2d input depth " + std::to_string(input.dim(1)) + " does not match kernel depth " +
                             std::to_string(kernel.dim(1)));
    }
    ConvGeometry g{};
    g.batch = input.dim(0);
    g.depth = input.dim(1);
    g.height = input.dim(2);
    g.width = input.dim(3);
    g.channels = kernel.dim(0);
    g.kernel_h = kernel.dim(2);
    g.kernel_w = kernel.dim(3);
    g.stride = stride;
    g.padding = padding;
    g.out_h = conv_output_extent(g.height, g.kernel_h, stride, padding);
    g.out_w = conv_output_extent(g.width, g.kernel_w, stride, padding);
    return g;
}

// Unfolds one sample [D,H,W] into a (D*Kh*Kw) x (Ho*Wo) patch matrix.
template <typename Scalar>
void im2col(const Scalar* in, const ConvGeometry& g, RowMatrix<Scalar>& cols) {
    cols.resize(g.patch(), g.out_area());
    for (Index d = 0; d < g.depth; ++d) {
        for (Index j = 0; j < g.kernel_h; ++j) {
            for (Index k = 0; k < g.kernel_w; ++k) {
                Scalar* row = cols.row((d * g.kernel_h + j) * g.kernel_w + k).data();
                for (Index x = 0; x < g.out_h; ++x) {
                    const Index ix = x * g.stride + j - g.padding;
                    Scalar* dst = row + x * g.out_w;
                    if (ix < 0 || ix >= g.height) {
                        std::fill(dst, dst + g.out_w, Scalar(0));
                        continue;
                    }
                    const Scalar* src = in + (d * g.height + ix) * g.width;
                    for (Index y = 0; y < g.out_w; ++y) {
                        const Index iy = y * g.stride + k - g.padding;
                        dst[y] = (iy >= 0 && iy < g.width) ? src[iy] : Scalar(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters patch cotangents back onto one sample.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Scalar* out) {
    for (Index d = 0; d < g.depth; ++d) {
        for (Index j = 0; j < g.kernel_h; ++j) {
            for (Index k = 0; k < g.kernel_w; ++k) {
                const Scalar* row = cols.row((d * g.kernel_h + j) * g.kernel_w + k).data();
                for (Index x = 0; x < g.out_h; ++x) {
                    const Index ix = x * g.stride + j - g.padding;
                    if (ix < 0 || ix >= g.height) continue;
                    Scalar* dst = out + (d * g.height + ix) * g.width;
                    const Scalar* src = row + x * g.out_w;
                    for (Index y = 0; y < g.out_w; ++y) {
                        const Index iy = y * g.stride + k - g.padding;
                        if (iy >= 0 && iy < g.width) dst[iy] += src[y];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Strided, zero-padded 2-D cross-correlation over a batch:
///   out[b,c,x,y] = sum_{d,j,k} in[b,d,x*s+j-p,y*s+k-p] * kernel[c,d,j,k] + bias[c]
/// Samples are processed in order with a fixed reduction order, so results are
/// reproducible bit for bit.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel, const Tensor<Scalar>& bias,
                      Index stride, Index padding) {
    const auto g = detail::conv_geometry(input, kernel, stride, padding);
    if (bias.size() != g.channels) {
        throw DimensionError("conv2d bias length " + std::to_string(bias.size()) + " does not match " +
                             std::to_string(g.channels) + " output channels");
    }
    Tensor<Scalar> out({g.batch, g.channels, g.out_h, g.out_w});
    const auto weights = kernel.matrix(g.channels, g.patch());
    const auto b = bias.vec();
    RowMatrix<Scalar> cols;
    for (Index n = 0; n < g.batch; ++n) {
        detail::im2col(input.data() + n * g.in_volume(), g, cols);
        Eigen::Map<RowMatrix<Scalar>> o(out.data() + n * g.channels * g.out_area(), g.channels, g.out_area());
        o.noalias() = weights * cols;
        o.colwise() += b;
    }
    return out;
}

template <typename Scalar>
struct Conv2dGradients {
    Tensor<Scalar> grad_input;  // empty when not requested
    Tensor<Scalar> grad_kernel;
    Tensor<Scalar> grad_bias;
};

/// Exact adjoint of conv2d. Pass want_input_grad = false when the input is a
/// leaf (the encoder's wafer tensor) to skip the col2im pass.
template <typename Scalar>
Conv2dGradients<Scalar> conv2d_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                        const Tensor<Scalar>& kernel, Index stride, Index padding,
                                        bool want_input_grad = true) {
    const auto g = detail::conv_geometry(input, kernel, stride, padding);
    const Shape expected{g.batch, g.channels, g.out_h, g.out_w};
    if (grad_out.shape() != expected) {
        throw DimensionError("conv2d_backward cotangent shape " + to_string(grad_out.shape()) + " differs from " +
                             to_string(expected));
    }
    Conv2dGradients<Scalar> grads;
    grads.grad_kernel = Tensor<Scalar>(kernel.shape());
    grads.grad_bias = Tensor<Scalar>({g.channels});
    if (want_input_grad) grads.grad_input = Tensor<Scalar>(input.shape());

    const auto weights = kernel.matrix(g.channels, g.patch());
    auto gk = grads.grad_kernel.matrix(g.channels, g.patch());
    auto gb = grads.grad_bias.vec();
    RowMatrix<Scalar> cols;
    RowMatrix<Scalar> grad_cols;
    for (Index n = 0; n < g.batch; ++n) {
        Eigen::Map<const RowMatrix<Scalar>> go(grad_out.data() + n * g.channels * g.out_area(), g.channels,
                                               g.out_area());
        detail::im2col(input.data() + n * g.in_volume(), g, cols);
        gk.noalias() += go * cols.transpose();
        gb += go.rowwise().sum();
        if (want_input_grad) {
            grad_cols.noalias() = weights.transpose() * go;
            detail::col2im(grad_cols, g, grads.grad_input.data() + n * g.in_volume());
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Affine map

/// out[b,u] = sum_v weight[u,v] * in[b,v] + bias[u]. Inputs of rank > 2 are
/// flattened behind the batch axis.
template <typename Scalar>
Tensor<Scalar> matmul_affine(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
    if (input.rank() < 2 || weight.rank() != 2) {
        throw DimensionError("matmul_affine expects input (B,...) and weight (U,U_prev)");
    }
    const Index batch = input.dim(0);
    const Index in_units = input.size() / batch;
    if (in_units != weight.dim(1)) {
        throw DimensionError("matmul_affine input width " + std::to_string(in_units) + " does not match weight " +
                             to_string(weight.shape()));
    }
    if (bias.size() != weight.dim(0)) {
        throw DimensionError("matmul_affine bias length does not match weight rows");
    }
    Tensor<Scalar> out({batch, weight.dim(0)});
    auto o = out.matrix();
    o.noalias() = input.matrix(batch, in_units) * weight.matrix().transpose();
    o.rowwise() += bias.vec().transpose();
    return out;
}

template <typename Scalar>
struct AffineGradients {
    Tensor<Scalar> grad_input;
    Tensor<Scalar> grad_weight;
    Tensor<Scalar> grad_bias;
};

template <typename Scalar>
AffineGradients<Scalar> matmul_affine_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                               const Tensor<Scalar>& weight) {
    if (input.rank() < 2 || weight.rank() != 2 || grad_out.rank() != 2) {
        throw DimensionError("matmul_affine_backward expects grad_out (B,U), input (B,...), weight (U,U_prev)");
    }
    const Index batch = input.dim(0);
    const Index in_units = input.size() / batch;
    if (in_units != weight.dim(1) || grad_out.dim(0) != batch || grad_out.dim(1) != weight.dim(0)) {
        throw DimensionError("matmul_affine_backward shapes " + to_string(grad_out.shape()) + ", " +
                             to_string(input.shape()) + ", " + to_string(weight.shape()) + " are inconsistent");
    }
    AffineGradients<Scalar> grads{Tensor<Scalar>(input.shape()), Tensor<Scalar>(weight.shape()),
                                  Tensor<Scalar>({weight.dim(0)})};
    const auto go = grad_out.matrix();
    grads.grad_input.matrix(batch, in_units).noalias() = go * weight.matrix();
    grads.grad_weight.matrix().noalias() = go.transpose() * input.matrix(batch, in_units);
    grads.grad_bias.vec() = go.colwise().sum().transpose();
    return grads;
}

}  // namespace w2s
