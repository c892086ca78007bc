#include "wdce/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "wdce/ops.hpp"

namespace wdce {

SkeletonGraph build_graph(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                          std::size_t joints) {
    if (joints == 0) throw std::invalid_argument("build_graph: need at least one joint");
    std::vector<double> adj(joints * joints, 0.0);
    for (std::size_t v = 0; v < joints; ++v) adj[v * joints + v] = 1.0;  // self loops
    for (const auto& [a, b] : edges) {
        if (a >= joints || b >= joints) {
            throw std::invalid_argument("build_graph: edge (" + std::to_string(a) + ", " +
                                        std::to_string(b) + ") out of range for " +
                                        std::to_string(joints) + " joints");
        }
        if (a == b) throw std::invalid_argument("build_graph: self edges are implicit");
        if (adj[a * joints + b] != 0.0) {
            throw std::invalid_argument("build_graph: duplicate edge (" + std::to_string(a) + ", " +
                                        std::to_string(b) + ")");
        }
        adj[a * joints + b] = 1.0;
        adj[b * joints + a] = 1.0;
    }

    std::vector<double> inv_sqrt_deg(joints);
    for (std::size_t v = 0; v < joints; ++v) {
        double deg = 0.0;
        for (std::size_t u = 0; u < joints; ++u) deg += adj[v * joints + u];
        inv_sqrt_deg[v] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t v = 0; v < joints; ++v) {
        for (std::size_t u = 0; u < joints; ++u) {
            adj[v * joints + u] *= inv_sqrt_deg[v] * inv_sqrt_deg[u];
        }
    }

    SkeletonGraph g;
    g.joints = joints;
    g.edges = edges;
    g.adjacency = Tensor::from_data({joints, joints}, std::move(adj));
    return g;
}

SkeletonGraph toy_skeleton(std::size_t joints) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t v = 1; v < joints; ++v) {
        if (v <= joints / 2) {
            edges.emplace_back(v - 1, v);
        } else {
            edges.emplace_back(0, v);
        }
    }
    return build_graph(edges, joints);
}

void BackboneConfig::validate() const {
    if (n_stgc == 0) throw std::invalid_argument("backbone needs at least one ST-GC layer");
    if (channels.size() != n_stgc) {
        throw std::invalid_argument("backbone channels list has " + std::to_string(channels.size()) +
                                    " entries for " + std::to_string(n_stgc) + " ST-GC layers");
    }
    for (std::size_t c : channels) {
        if (c == 0) throw std::invalid_argument("backbone channel counts must be positive");
    }
    if (heads == 0) throw std::invalid_argument("backbone needs at least one attention head");
    if (out_channels() % heads != 0) {
        throw std::invalid_argument("backbone channels (" + std::to_string(out_channels()) +
                                    ") must be divisible by heads (" + std::to_string(heads) + ")");
    }
    if (tcn_kernel == 0 || tcn_kernel % 2 == 0) {
        throw std::invalid_argument("tcn_kernel must be odd so padding preserves the frame count");
    }
}

namespace {

// relu-facing convolutions use the relu-aware uniform bound sqrt(6/fan_in)
// so activation magnitudes survive the stack; plain linear maps (the
// attention projections) keep the 1/sqrt(fan_in) bound
TensorPtr relu_conv_weights(std::size_t c_out, std::size_t c_in, std::size_t kh, Rng& rng) {
    return Tensor::uniform({c_out, c_in, kh, 1}, std::sqrt(6.0 / double(c_in * kh)), rng, true);
}

TensorPtr linear_map_weights(std::size_t c_out, std::size_t c_in, Rng& rng) {
    return Tensor::uniform({c_out, c_in, 1, 1}, 1.0 / std::sqrt(double(c_in)), rng, true);
}

// y[n,c,t,v] = sum_u x[n,c,t,u] A[u,v]; A is symmetric so left/right
// application coincide.
TensorPtr graph_aggregate(const TensorPtr& x, const SkeletonGraph& graph) {
    const std::size_t joints = graph.joints;
    if (x->shape[3] != joints) {
        throw std::invalid_argument("graph aggregation: input has " + std::to_string(x->shape[3]) +
                                    " joints, graph has " + std::to_string(joints));
    }
    const std::size_t rows = x->size() / joints;
    auto flat = reshape(x, {rows, joints});
    return reshape(matmul(flat, graph.adjacency), x->shape);
}

TensorPtr tcn_block(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    const std::size_t k = w->shape[2];
    return relu(conv2d(x, w, b, (k - 1) / 2, 0));
}

}  // namespace

BackboneParams BackboneParams::init(const BackboneConfig& cfg, std::size_t in_channels, Rng& rng) {
    cfg.validate();
    BackboneParams p;
    std::size_t c_prev = in_channels;
    for (std::size_t i = 0; i < cfg.n_stgc; ++i) {
        const std::size_t c_out = cfg.channels[i];
        StGcLayerParams layer;
        layer.gcn_w = relu_conv_weights(c_out, c_prev, 1, rng);
        layer.gcn_b = Tensor::zeros({c_out}, true);
        layer.tcn_w = relu_conv_weights(c_out, c_out, cfg.tcn_kernel, rng);
        layer.tcn_b = Tensor::zeros({c_out}, true);
        p.stgc.push_back(std::move(layer));
        c_prev = c_out;
    }
    for (std::size_t i = 0; i < cfg.n_ssa; ++i) {
        SsaLayerParams layer;
        layer.heads = cfg.heads;
        layer.wq = linear_map_weights(c_prev, c_prev, rng);
        layer.bq = Tensor::zeros({c_prev}, true);
        layer.wk = linear_map_weights(c_prev, c_prev, rng);
        layer.bk = Tensor::zeros({c_prev}, true);
        layer.wv = linear_map_weights(c_prev, c_prev, rng);
        layer.bv = Tensor::zeros({c_prev}, true);
        layer.wo = linear_map_weights(c_prev, c_prev, rng);
        layer.bo = Tensor::zeros({c_prev}, true);
        layer.tcn_w = relu_conv_weights(c_prev, c_prev, cfg.tcn_kernel, rng);
        layer.tcn_b = Tensor::zeros({c_prev}, true);
        p.ssa.push_back(std::move(layer));
    }
    return p;
}

std::vector<TensorPtr> BackboneParams::parameters() const {
    std::vector<TensorPtr> out;
    for (const auto& layer : stgc) {
        auto ps = layer.parameters();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    for (const auto& layer : ssa) {
        auto ps = layer.parameters();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

TensorPtr st_gc_layer(const TensorPtr& x, const SkeletonGraph& graph, const StGcLayerParams& p) {
    if (!x || x->rank() != 4) {
        throw std::invalid_argument("st_gc_layer: input must be N x C x T x V");
    }
    const std::size_t c_in = x->shape[1];
    const std::size_t c_out = p.gcn_w->shape[0];
    if (p.gcn_w->shape[1] != c_in) {
        throw std::invalid_argument("st_gc_layer: weights expect " +
                                    std::to_string(p.gcn_w->shape[1]) + " input channels, got " +
                                    std::to_string(c_in));
    }

    auto spatial = relu(conv2d(graph_aggregate(x, graph), p.gcn_w, p.gcn_b, 0, 0));
    auto temporal = tcn_block(spatial, p.tcn_w, p.tcn_b);
    if (c_in == c_out) return add(temporal, x);
    return temporal;
}

TensorPtr ssa_tformer_layer(const TensorPtr& x, const SsaLayerParams& p, TensorPtr* attention_out) {
    if (!x || x->rank() != 4) {
        throw std::invalid_argument("ssa_tformer_layer: input must be N x C x T x V");
    }
    const std::size_t n = x->shape[0], c = x->shape[1], t = x->shape[2], v = x->shape[3];
    if (p.wq->shape[1] != c) {
        throw std::invalid_argument("ssa_tformer_layer: weights expect " +
                                    std::to_string(p.wq->shape[1]) + " channels, got " +
                                    std::to_string(c));
    }
    if (c % p.heads != 0) {
        throw std::invalid_argument("ssa_tformer_layer: " + std::to_string(c) +
                                    " channels not divisible by " + std::to_string(p.heads) +
                                    " heads");
    }
    const std::size_t h = p.heads;
    const std::size_t dh = c / h;

    auto q = conv2d(x, p.wq, p.bq, 0, 0);
    auto k = conv2d(x, p.wk, p.bk, 0, 0);
    auto val = conv2d(x, p.wv, p.bv, 0, 0);

    // N x C x T x V -> (N*h*T) x V x dh per head, joints as rows
    auto to_rows = [&](const TensorPtr& y) {
        auto split = reshape(y, {n, h, dh, t, v});
        return reshape(permute(split, {0, 1, 3, 4, 2}), {n * h * t, v, dh});
    };
    auto qr = to_rows(q);
    auto kr = to_rows(k);
    auto vr = to_rows(val);

    auto scores = mul_scalar(bmm(qr, permute(kr, {0, 2, 1})), 1.0 / std::sqrt(double(dh)));
    auto probs = softmax(scores, 2);  // (N*h*T) x V x V, keys on the last axis
    if (attention_out != nullptr) {
        *attention_out = reshape(probs, {n, h, t, v, v});
    }

    auto context = bmm(probs, vr);  // (N*h*T) x V x dh
    auto merged = reshape(permute(reshape(context, {n, h, t, v, dh}), {0, 1, 4, 2, 3}),
                          {n, c, t, v});
    auto attended = add(x, conv2d(merged, p.wo, p.bo, 0, 0));
    return tcn_block(attended, p.tcn_w, p.tcn_b);
}

TensorPtr extract(const TensorPtr& x, const SkeletonGraph& graph, const BackboneConfig& cfg,
                  const BackboneParams& params) {
    cfg.validate();
    if (params.stgc.size() != cfg.n_stgc || params.ssa.size() != cfg.n_ssa) {
        throw std::invalid_argument("extract: parameter stack does not match config");
    }
    TensorPtr h = x;
    for (const auto& layer : params.stgc) h = st_gc_layer(h, graph, layer);
    for (const auto& layer : params.ssa) h = ssa_tformer_layer(h, layer);
    return h;
}

}  // namespace wdce
