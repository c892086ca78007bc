#pragma once

#include <cstddef>
#include <vector>

#include "wdce/tensor.hpp"

namespace wdce {

// Elementwise arithmetic with trailing-axis broadcasting. A missing or
// size-1 axis stretches to match; anything else is a shape error.
Shape broadcast_shape(const Shape& a, const Shape& b);

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr div(const TensorPtr& a, const TensorPtr& b);
TensorPtr add_scalar(const TensorPtr& a, double c);
TensorPtr mul_scalar(const TensorPtr& a, double c);
TensorPtr neg(const TensorPtr& a);

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);  // 2-d x 2-d
TensorPtr bmm(const TensorPtr& a, const TensorPtr& b);     // 3-d, equal batch

/// x: N x C_in x L, w: C_out x C_in x k, bias: C_out (or null). Stride 1,
/// zero padding `pad` on both ends of L.
TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, std::size_t pad);

/// x: N x C_in x H x W, w: C_out x C_in x kh x kw, bias: C_out (or null).
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 std::size_t pad_h, std::size_t pad_w);

TensorPtr reshape(const TensorPtr& x, Shape new_shape);
TensorPtr permute(const TensorPtr& x, const std::vector<std::size_t>& order);
TensorPtr transpose2d(const TensorPtr& x);
TensorPtr broadcast_to(const TensorPtr& x, const Shape& target);

TensorPtr sum(const TensorPtr& x, std::vector<std::size_t> axes, bool keep_dims = false);
TensorPtr mean(const TensorPtr& x, std::vector<std::size_t> axes, bool keep_dims = false);
/// Euclidean norm reducing one axis.
TensorPtr l2_norm(const TensorPtr& x, std::size_t axis, bool keep_dims = false);

TensorPtr relu(const TensorPtr& x);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr softmax(const TensorPtr& x, std::size_t axis);
TensorPtr log_softmax(const TensorPtr& x, std::size_t axis);
TensorPtr log(const TensorPtr& x);
TensorPtr exp(const TensorPtr& x);

TensorPtr concat(const std::vector<TensorPtr>& parts, std::size_t axis);
/// Contiguous range [start, stop) along one axis.
TensorPtr slice(const TensorPtr& x, std::size_t axis, std::size_t start, std::size_t stop);

/// Mean cross-entropy over the batch; logits: N x K.
TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<std::size_t>& labels);

/// Row-wise argmax of an N x K tensor.
std::vector<std::size_t> argmax_rows(const TensorPtr& logits);

}  // namespace wdce
