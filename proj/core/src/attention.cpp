#include "wdce/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "wdce/ops.hpp"

namespace wdce {

DecouplingAttentionParams DecouplingAttentionParams::init(std::size_t channels, std::size_t frames,
                                                          std::size_t kernel, Rng& rng) {
    if (frames < 2 || frames % 2 != 0) {
        throw std::invalid_argument("decoupling attention needs an even frame count, got " +
                                    std::to_string(frames));
    }
    if (kernel % 2 == 0) {
        throw std::invalid_argument("decoupling attention kernel must be odd for same-length padding");
    }
    DecouplingAttentionParams p;
    p.kernel = kernel;
    p.linear_w = Tensor::uniform({frames, frames / 2}, 1.0 / std::sqrt(double(frames)), rng, true);
    p.linear_b = Tensor::zeros({frames / 2}, true);
    p.conv_w = Tensor::uniform({2, channels, kernel}, 1.0 / std::sqrt(double(channels * kernel)), rng, true);
    p.conv_b = Tensor::zeros({2}, true);
    return p;
}

std::vector<TensorPtr> DecouplingAttentionParams::parameters() const {
    return {linear_w, linear_b, conv_w, conv_b};
}

TrajectoryAttentionParams TrajectoryAttentionParams::init(std::size_t channels, std::size_t joints,
                                                          std::size_t att_dim, Rng& rng) {
    if (att_dim == 0) throw std::invalid_argument("trajectory attention width must be >= 1");
    TrajectoryAttentionParams p;
    p.mlp_a_w = Tensor::uniform({joints, att_dim}, 1.0 / std::sqrt(double(joints)), rng, true);
    p.mlp_a_b = Tensor::zeros({att_dim}, true);
    p.mlp_b_w = Tensor::uniform({channels, att_dim}, 1.0 / std::sqrt(double(channels)), rng, true);
    p.mlp_b_b = Tensor::zeros({att_dim}, true);
    return p;
}

std::vector<TensorPtr> TrajectoryAttentionParams::parameters() const {
    return {mlp_a_w, mlp_a_b, mlp_b_w, mlp_b_b};
}

double AttentionMap::max_row_sum_error() const {
    if (!values || values->rank() != 3) return 1.0;
    const std::size_t n = values->shape[0], c = values->shape[1], v = values->shape[2];
    double worst = 0.0;
    for (std::size_t i = 0; i < n * c; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < v; ++j) s += values->data[i * v + j];
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    return worst;
}

TensorPtr feature_to_trajectory_layout(const TensorPtr& x) {
    if (!x || x->rank() != 4) {
        throw std::invalid_argument("expected N x C x T x V features, got " +
                                    (x ? shape_str(x->shape) : std::string("null")));
    }
    const std::size_t n = x->shape[0], c = x->shape[1], t = x->shape[2], v = x->shape[3];
    return reshape(permute(x, {0, 3, 1, 2}), {n, v * c, t});
}

TensorPtr band_to_feature_layout(const TensorPtr& band, std::size_t channels, std::size_t joints) {
    if (!band || band->rank() != 3 || band->shape[1] != joints * channels) {
        throw std::invalid_argument("band layout mismatch: got " +
                                    (band ? shape_str(band->shape) : std::string("null")) +
                                    " for V*C = " + std::to_string(joints * channels));
    }
    const std::size_t n = band->shape[0], half = band->shape[2];
    return permute(reshape(band, {n, joints, channels, half}), {0, 2, 3, 1});
}

std::pair<TensorPtr, TensorPtr> decoupling_gates(const TensorPtr& x_embed,
                                                 const DecouplingAttentionParams& p) {
    if (!x_embed || x_embed->rank() != 4) {
        throw std::invalid_argument("decoupling_gates: x_embed must be N x C x T x V");
    }
    const std::size_t n = x_embed->shape[0], c = x_embed->shape[1], t = x_embed->shape[2];
    const std::size_t half = t / 2;
    if (t % 2 != 0) throw std::invalid_argument("decoupling_gates: frame count must be even");
    if (p.linear_w->shape[0] != t || p.conv_w->shape[1] != c) {
        throw std::invalid_argument("decoupling_gates: params built for C=" +
                                    std::to_string(p.conv_w->shape[1]) + ", T=" +
                                    std::to_string(p.linear_w->shape[0]) + " but input is C=" +
                                    std::to_string(c) + ", T=" + std::to_string(t));
    }

    // squeeze joints, halve time, then a small conv emits one weight
    // vector per band
    auto pooled = mean(x_embed, {3});                                  // N x C x T
    auto halved = reshape(matmul(reshape(pooled, {n * c, t}), p.linear_w), {n, c, half});
    halved = add(halved, p.linear_b);                                  // bias over T/2
    auto gates = sigmoid(conv1d(halved, p.conv_w, p.conv_b, (p.kernel - 1) / 2));  // N x 2 x T/2
    return {slice(gates, 1, 0, 1), slice(gates, 1, 1, 2)};             // N x 1 x T/2 each
}

DecoupledBands decoupling_attention(const TensorPtr& x_embed, const TensorPtr& x_low,
                                    const TensorPtr& x_high, const DecouplingAttentionParams& p) {
    if (!x_embed || x_embed->rank() != 4) {
        throw std::invalid_argument("decoupling_attention: x_embed must be N x C x T x V");
    }
    const std::size_t n = x_embed->shape[0], c = x_embed->shape[1];
    const std::size_t t = x_embed->shape[2], v = x_embed->shape[3];
    const std::size_t half = t / 2;
    const Shape band_shape{n, v * c, half};
    if (!x_low || !x_high || x_low->shape != band_shape || x_high->shape != band_shape) {
        throw std::invalid_argument("decoupling_attention: bands must be " + shape_str(band_shape));
    }

    auto [weight_low, weight_high] = decoupling_gates(x_embed, p);

    auto low_feat = band_to_feature_layout(x_low, c, v);    // N x C x T/2 x V
    auto high_feat = band_to_feature_layout(x_high, c, v);

    // broadcast over channels and joints
    auto wl = reshape(weight_low, {n, 1, half, 1});
    auto wh = reshape(weight_high, {n, 1, half, 1});

    DecoupledBands out;
    out.salient = mul(low_feat, wl);
    out.subtle = mul(high_feat, wh);
    out.weight_low = weight_low;
    out.weight_high = weight_high;
    return out;
}

TrajectoryAttentionResult trajectory_attention(const TensorPtr& x_subtle,
                                               const TrajectoryAttentionParams& p) {
    if (!x_subtle || x_subtle->rank() != 4) {
        throw std::invalid_argument("trajectory_attention: input must be N x C x T x V");
    }
    const std::size_t n = x_subtle->shape[0], c = x_subtle->shape[1];
    const std::size_t v = x_subtle->shape[3];
    if (p.mlp_a_w->shape[0] != v || p.mlp_b_w->shape[0] != c) {
        throw std::invalid_argument("trajectory_attention: params built for C=" +
                                    std::to_string(p.mlp_b_w->shape[0]) + ", V=" +
                                    std::to_string(p.mlp_a_w->shape[0]) + " but input is C=" +
                                    std::to_string(c) + ", V=" + std::to_string(v));
    }
    if (p.mlp_a_w->shape[1] != p.mlp_b_w->shape[1]) {
        throw std::invalid_argument("trajectory_attention: branch widths differ");
    }
    const std::size_t d = p.mlp_a_w->shape[1];

    auto pooled = mean(x_subtle, {2});  // N x C x V

    // branch A maps joints, branch B maps channels of the transpose
    auto a = reshape(add(matmul(reshape(pooled, {n * c, v}), p.mlp_a_w), p.mlp_a_b), {n, c, d});
    auto pooled_t = permute(pooled, {0, 2, 1});  // N x V x C
    auto b = reshape(add(matmul(reshape(pooled_t, {n * v, c}), p.mlp_b_w), p.mlp_b_b), {n, v, d});
    auto scores = bmm(a, permute(b, {0, 2, 1}));  // N x C x V

    TrajectoryAttentionResult out;
    out.att.values = softmax(scores, 2);
    out.enhanced = mul(x_subtle, reshape(out.att.values, {n, c, 1, v}));
    return out;
}

}  // namespace wdce
