#include "wdce/wavelet.hpp"

#include <cmath>
#include <stdexcept>

#include "wdce/ops.hpp"

namespace wdce {

HaarFilterPair build_haar(std::size_t frames) {
    if (frames < 2 || frames % 2 != 0) {
        throw std::invalid_argument("build_haar: frame count must be even and >= 2, got " +
                                    std::to_string(frames));
    }
    const std::size_t half = frames / 2;
    const double s = 1.0 / std::sqrt(2.0);

    auto low = Tensor::zeros({frames, half});
    auto high = Tensor::zeros({frames, half});
    for (std::size_t j = 0; j < half; ++j) {
        low->data[(2 * j) * half + j] = s;
        low->data[(2 * j + 1) * half + j] = s;
        high->data[(2 * j) * half + j] = s;
        high->data[(2 * j + 1) * half + j] = -s;
    }
    return HaarFilterPair{frames, std::move(low), std::move(high)};
}

namespace {

TensorPtr apply_filter(const TensorPtr& x, const TensorPtr& filter, std::size_t frames) {
    if (!x) throw std::invalid_argument("dwt: null input");
    if (x->rank() < 1 || x->shape.back() != frames) {
        throw std::invalid_argument("dwt: last extent of " + shape_str(x->shape) +
                                    " does not match filter frame count " + std::to_string(frames));
    }
    const std::size_t rows = x->size() / frames;
    auto flat = reshape(x, {rows, frames});
    auto projected = matmul(flat, filter);
    Shape out_shape = x->shape;
    out_shape.back() = frames / 2;
    return reshape(projected, std::move(out_shape));
}

}  // namespace

DwtBands dwt(const TensorPtr& x, const HaarFilterPair& filters) {
    return DwtBands{apply_filter(x, filters.low, filters.frames),
                    apply_filter(x, filters.high, filters.frames)};
}

TensorPtr idwt(const TensorPtr& low, const TensorPtr& high, const HaarFilterPair& filters) {
    if (!low || !high) throw std::invalid_argument("idwt: null input");
    if (low->shape != high->shape) {
        throw std::invalid_argument("idwt: band shapes differ, " + shape_str(low->shape) + " vs " +
                                    shape_str(high->shape));
    }
    const std::size_t half = filters.frames / 2;
    if (low->rank() < 1 || low->shape.back() != half) {
        throw std::invalid_argument("idwt: last extent of " + shape_str(low->shape) +
                                    " does not match half frame count " + std::to_string(half));
    }
    const std::size_t rows = low->size() / half;
    auto low_part = matmul(reshape(low, {rows, half}), transpose2d(filters.low));
    auto high_part = matmul(reshape(high, {rows, half}), transpose2d(filters.high));
    auto combined = add(low_part, high_part);
    Shape out_shape = low->shape;
    out_shape.back() = filters.frames;
    return reshape(combined, std::move(out_shape));
}

}  // namespace wdce
