#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "wdce/rng.hpp"
#include "wdce/tensor.hpp"

namespace wdce {

/// Skeleton topology with the symmetric-normalized adjacency
/// D^{-1/2} (A + I) D^{-1/2} used by every graph convolution.
struct SkeletonGraph {
    std::size_t joints = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    TensorPtr adjacency;  // V x V, constant
};

SkeletonGraph build_graph(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                          std::size_t joints);

/// Chain through the first half of the joints, remaining joints attached
/// to joint 0 as a star. Connected for any V >= 1.
SkeletonGraph toy_skeleton(std::size_t joints);

struct BackboneConfig {
    std::size_t n_stgc = 3;
    std::size_t n_ssa = 2;
    std::vector<std::size_t> channels = {16, 32, 32};  // one entry per ST-GC layer
    std::size_t heads = 2;
    std::size_t tcn_kernel = 9;  // odd, so padding preserves T
    void validate() const;
    std::size_t out_channels() const { return channels.back(); }
};

struct StGcLayerParams {
    TensorPtr gcn_w;  // C_out x C_in x 1 x 1
    TensorPtr gcn_b;  // C_out
    TensorPtr tcn_w;  // C_out x C_out x k x 1
    TensorPtr tcn_b;  // C_out
    std::vector<TensorPtr> parameters() const { return {gcn_w, gcn_b, tcn_w, tcn_b}; }
};

struct SsaLayerParams {
    TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;  // 1x1 channel maps + biases
    TensorPtr tcn_w, tcn_b;
    std::size_t heads = 1;
    std::vector<TensorPtr> parameters() const {
        return {wq, bq, wk, bk, wv, bv, wo, bo, tcn_w, tcn_b};
    }
};

struct BackboneParams {
    std::vector<StGcLayerParams> stgc;
    std::vector<SsaLayerParams> ssa;

    static BackboneParams init(const BackboneConfig& cfg, std::size_t in_channels, Rng& rng);
    std::vector<TensorPtr> parameters() const;
};

/// Graph convolution + temporal convolution with relu after each and a
/// residual connection when the channel count is preserved.
TensorPtr st_gc_layer(const TensorPtr& x, const SkeletonGraph& graph, const StGcLayerParams& p);

/// Per-frame multi-head self-attention over joints with residual, then
/// the same temporal convolution block. Optionally hands back the
/// attention probabilities as N x heads x T x V x V.
TensorPtr ssa_tformer_layer(const TensorPtr& x, const SsaLayerParams& p,
                            TensorPtr* attention_out = nullptr);

/// Full stack: n_stgc ST-GC layers then n_ssa SSA-Tformer layers.
/// Preserves T and V; channels follow cfg.channels.
TensorPtr extract(const TensorPtr& x, const SkeletonGraph& graph, const BackboneConfig& cfg,
                  const BackboneParams& params);

}  // namespace wdce
