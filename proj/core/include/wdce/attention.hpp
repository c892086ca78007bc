#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "wdce/rng.hpp"
#include "wdce/tensor.hpp"

namespace wdce {

/// Parameters of the temporal decoupling attention: a linear map halving
/// the temporal axis followed by a 1-d convolution that squeezes the
/// channel axis down to one weight vector per frequency band.
struct DecouplingAttentionParams {
    TensorPtr linear_w;  // T x T/2
    TensorPtr linear_b;  // T/2
    TensorPtr conv_w;    // 2 x C x k
    TensorPtr conv_b;    // 2
    std::size_t kernel = 3;

    static DecouplingAttentionParams init(std::size_t channels, std::size_t frames,
                                          std::size_t kernel, Rng& rng);
    std::vector<TensorPtr> parameters() const;
};

/// Two fully connected branches whose outer product scores every
/// (channel, joint) trajectory.
struct TrajectoryAttentionParams {
    TensorPtr mlp_a_w;  // V x d_att
    TensorPtr mlp_a_b;  // d_att
    TensorPtr mlp_b_w;  // C x d_att
    TensorPtr mlp_b_b;  // d_att

    static TrajectoryAttentionParams init(std::size_t channels, std::size_t joints,
                                          std::size_t att_dim, Rng& rng);
    std::vector<TensorPtr> parameters() const;
};

/// N x C x V map; each (n, c) row is a softmax over joints.
struct AttentionMap {
    TensorPtr values;
    /// Largest deviation of any (n, c) row sum from 1.
    double max_row_sum_error() const;
};

struct DecoupledBands {
    TensorPtr salient;      // N x C x T/2 x V
    TensorPtr subtle;       // N x C x T/2 x V
    TensorPtr weight_low;   // N x 1 x T/2, sigmoid outputs
    TensorPtr weight_high;  // N x 1 x T/2
};

/// The gate pipeline alone: joint-pooled embedding, linear halving of the
/// temporal axis, 1-d convolution down to two channels, sigmoid. Returns
/// (weight_low, weight_high), each N x 1 x T/2.
std::pair<TensorPtr, TensorPtr> decoupling_gates(const TensorPtr& x_embed,
                                                 const DecouplingAttentionParams& p);

/// Recalibrates the temporal responses of the two frequency bands.
/// x_embed: N x C x T x V; x_low/x_high: N x (V*C) x T/2 as produced by
/// dwt of the trajectory-major reshape of x_embed.
DecoupledBands decoupling_attention(const TensorPtr& x_embed, const TensorPtr& x_low,
                                    const TensorPtr& x_high, const DecouplingAttentionParams& p);

/// Reshape helper shared with the attention-free path: N x (V*C) x T/2
/// band back to N x C x T/2 x V.
TensorPtr band_to_feature_layout(const TensorPtr& band, std::size_t channels, std::size_t joints);

/// N x C x T x V to N x (V*C) x T trajectory-major layout fed to the DWT.
TensorPtr feature_to_trajectory_layout(const TensorPtr& x);

struct TrajectoryAttentionResult {
    TensorPtr enhanced;  // same shape as input
    AttentionMap att;
};

/// Scores trajectories and rescales the subtle band: softmax over joints
/// of the product of the two MLP branches, broadcast over time.
TrajectoryAttentionResult trajectory_attention(const TensorPtr& x_subtle,
                                               const TrajectoryAttentionParams& p);

}  // namespace wdce
