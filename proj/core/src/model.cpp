#include "wdce/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "wdce/ops.hpp"
#include "wdce/rng.hpp"
#include "wdce/serialize.hpp"

namespace wdce {

using json = nlohmann::json;

std::string modality_name(Modality m) {
    switch (m) {
        case Modality::joint: return "joint";
        case Modality::bone: return "bone";
        case Modality::joint_motion: return "joint_motion";
        case Modality::bone_motion: return "bone_motion";
    }
    throw std::logic_error("unknown modality");
}

Modality modality_from_name(const std::string& name) {
    if (name == "joint") return Modality::joint;
    if (name == "bone") return Modality::bone;
    if (name == "joint_motion") return Modality::joint_motion;
    if (name == "bone_motion") return Modality::bone_motion;
    throw std::invalid_argument("unknown modality \"" + name +
                                "\" (expected joint, bone, joint_motion or bone_motion)");
}

void TrainConfig::validate() const {
    if (lambda_fuse < 0.0 || lambda_salient < 0.0 || lambda_proto < 0.0) {
        throw std::invalid_argument("loss weights must be nonnegative");
    }
    contrastive.validate();
    if (proto_momentum <= 0.0 || proto_momentum >= 1.0) {
        throw std::invalid_argument("prototype momentum must lie in (0, 1)");
    }
    if (learning_rate < 0.0) throw std::invalid_argument("negative learning rate");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("negative weight decay");
    if (lr_decay <= 0.0 || lr_decay > 1.0) throw std::invalid_argument("lr decay must lie in (0, 1]");
    if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    }
    if (att_dim == 0) throw std::invalid_argument("att_dim must be >= 1");
    if (da_kernel == 0 || da_kernel % 2 == 0) {
        throw std::invalid_argument("da_kernel must be odd for same-length padding");
    }
    if (use_channel_split && use_dwt) {
        throw std::invalid_argument("channel split replaces the wavelet split; enable only one");
    }
    for (std::size_t m : milestones) {
        if (m >= epochs) {
            throw std::invalid_argument("milestone epoch " + std::to_string(m) +
                                        " not before total epochs " + std::to_string(epochs));
        }
    }
}

std::vector<std::size_t> TrainConfig::effective_milestones() const {
    if (!milestones.empty()) return milestones;
    std::vector<std::size_t> out;
    const auto m1 = static_cast<std::size_t>(std::llround(0.6 * double(epochs)));
    const auto m2 = static_cast<std::size_t>(std::llround(0.8 * double(epochs)));
    if (m1 > 0 && m1 < epochs) out.push_back(m1);
    if (m2 > m1 && m2 < epochs) out.push_back(m2);
    return out;
}

WdceModel::WdceModel(BackboneConfig backbone_cfg, TrainConfig train_cfg, SkeletonGraph graph,
                     std::size_t in_channels, std::size_t frames, std::size_t classes)
    : bcfg_(std::move(backbone_cfg)), tcfg_(std::move(train_cfg)), graph_(std::move(graph)),
      in_channels_(in_channels), frames_(frames), classes_(classes) {
    bcfg_.validate();
    tcfg_.validate();
    if (classes_ < 2) throw std::invalid_argument("model needs at least two classes");
    if (frames_ < 2 || frames_ % 2 != 0) {
        throw std::invalid_argument("model frame count must be even and >= 2, got " +
                                    std::to_string(frames_));
    }

    const std::size_t c_embed = bcfg_.out_channels();
    if (tcfg_.use_channel_split && c_embed % 2 != 0) {
        throw std::invalid_argument("channel split needs an even embedding channel count");
    }
    feature_dim_ = tcfg_.use_channel_split ? c_embed / 2 : c_embed;

    // independent substreams so ablation variants share backbone init
    Rng backbone_rng(derive_seed(tcfg_.seed, {1}));
    backbone_ = BackboneParams::init(bcfg_, in_channels_, backbone_rng);

    if (tcfg_.use_dwt) haar_ = build_haar(frames_);
    if (tcfg_.use_da) {
        Rng rng(derive_seed(tcfg_.seed, {2}));
        da_ = DecouplingAttentionParams::init(c_embed, frames_, tcfg_.da_kernel, rng);
    }
    if (tcfg_.use_ta) {
        if (!tcfg_.has_decoupling()) {
            throw std::invalid_argument("trajectory attention needs a decoupled subtle path");
        }
        Rng rng(derive_seed(tcfg_.seed, {3}));
        ta_ = TrajectoryAttentionParams::init(feature_dim_, graph_.joints, tcfg_.att_dim, rng);
    }

    Rng head_rng(derive_seed(tcfg_.seed, {4}));
    const double bound = 1.0 / std::sqrt(double(feature_dim_));
    fuse_w_ = Tensor::uniform({feature_dim_, classes_}, bound, head_rng, true);
    fuse_b_ = Tensor::zeros({classes_}, true);
    if (tcfg_.has_decoupling()) {
        sal_w_ = Tensor::uniform({feature_dim_, classes_}, bound, head_rng, true);
        sal_b_ = Tensor::zeros({classes_}, true);
    }

    if (tcfg_.use_pcl) {
        if (!tcfg_.has_decoupling()) {
            throw std::invalid_argument("prototype contrastive loss needs a subtle path");
        }
        const std::size_t att_dim = tcfg_.use_ta ? feature_dim_ * graph_.joints : 0;
        bank_.emplace(classes_, feature_dim_, att_dim, tcfg_.proto_momentum);
    }
}

PrototypeBank& WdceModel::bank() {
    if (!bank_) throw std::logic_error("model has no prototype bank (PCL disabled)");
    return *bank_;
}

const PrototypeBank& WdceModel::bank() const {
    if (!bank_) throw std::logic_error("model has no prototype bank (PCL disabled)");
    return *bank_;
}

std::pair<TensorPtr, TensorPtr> channel_split_control(const TensorPtr& x_embed) {
    if (!x_embed || x_embed->rank() != 4) {
        throw std::invalid_argument("channel_split_control: input must be N x C x T x V");
    }
    const std::size_t n = x_embed->shape[0], c = x_embed->shape[1];
    const std::size_t t = x_embed->shape[2], v = x_embed->shape[3];
    if (c % 2 != 0) {
        throw std::invalid_argument("channel_split_control: channel count " + std::to_string(c) +
                                    " is odd");
    }
    if (t % 2 != 0) {
        throw std::invalid_argument("channel_split_control: frame count " + std::to_string(t) +
                                    " is odd");
    }
    auto pool_time = [&](const TensorPtr& half) {
        // pairwise averaging halves the temporal extent
        auto paired = reshape(half, {n, c / 2, t / 2, 2, v});
        return mean(paired, {3});
    };
    auto salient = pool_time(slice(x_embed, 1, 0, c / 2));
    auto subtle = pool_time(slice(x_embed, 1, c / 2, c));
    return {salient, subtle};
}

ForwardResult WdceModel::forward(const TensorPtr& batch) {
    if (!batch || batch->rank() != 4) {
        throw std::invalid_argument("forward: batch must be N x C x T x V");
    }
    if (batch->shape[1] != in_channels_ || batch->shape[2] != frames_ ||
        batch->shape[3] != graph_.joints) {
        throw std::invalid_argument("forward: batch " + shape_str(batch->shape) +
                                    " does not match model (C=" + std::to_string(in_channels_) +
                                    ", T=" + std::to_string(frames_) + ", V=" +
                                    std::to_string(graph_.joints) + ")");
    }

    auto x_embed = extract(batch, graph_, bcfg_, backbone_);
    const std::size_t n = batch->shape[0];

    ForwardResult out;
    if (!tcfg_.has_decoupling()) {
        auto pooled = mean(x_embed, {2, 3});  // N x C
        out.fused_pooled = pooled;
        out.logits_fuse = add(matmul(pooled, fuse_w_), fuse_b_);
        return out;
    }

    TensorPtr salient, subtle;
    if (tcfg_.use_channel_split) {
        auto halves = channel_split_control(x_embed);
        salient = halves.first;
        subtle = halves.second;
        if (tcfg_.use_da) {
            auto [wl, wh] = decoupling_gates(x_embed, *da_);
            const std::size_t half = frames_ / 2;
            salient = mul(salient, reshape(wl, {n, 1, half, 1}));
            subtle = mul(subtle, reshape(wh, {n, 1, half, 1}));
        }
    } else {
        auto bands = dwt(feature_to_trajectory_layout(x_embed), *haar_);
        if (tcfg_.use_da) {
            auto decoupled = decoupling_attention(x_embed, bands.low, bands.high, *da_);
            salient = decoupled.salient;
            subtle = decoupled.subtle;
        } else {
            salient = band_to_feature_layout(bands.low, feature_dim_, graph_.joints);
            subtle = band_to_feature_layout(bands.high, feature_dim_, graph_.joints);
        }
    }

    if (tcfg_.use_ta) {
        auto ta = trajectory_attention(subtle, *ta_);
        subtle = ta.enhanced;
        out.att = ta.att;
        out.att_flat = reshape(ta.att.values, {n, feature_dim_ * graph_.joints});
    }

    out.x_salient = salient;
    out.x_subtle = subtle;
    out.x_fuse = add(salient, subtle);
    out.subtle_pooled = mean(subtle, {2, 3});  // N x D
    out.salient_pooled = mean(salient, {2, 3});
    out.fused_pooled = mean(out.x_fuse, {2, 3});
    out.logits_fuse = add(matmul(out.fused_pooled, fuse_w_), fuse_b_);
    out.logits_salient = add(matmul(out.salient_pooled, sal_w_), sal_b_);
    return out;
}

std::vector<std::pair<std::string, TensorPtr>> WdceModel::named_parameters() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (std::size_t i = 0; i < backbone_.stgc.size(); ++i) {
        const auto& l = backbone_.stgc[i];
        const std::string base = "backbone.stgc" + std::to_string(i) + ".";
        out.emplace_back(base + "gcn_w", l.gcn_w);
        out.emplace_back(base + "gcn_b", l.gcn_b);
        out.emplace_back(base + "tcn_w", l.tcn_w);
        out.emplace_back(base + "tcn_b", l.tcn_b);
    }
    for (std::size_t i = 0; i < backbone_.ssa.size(); ++i) {
        const auto& l = backbone_.ssa[i];
        const std::string base = "backbone.ssa" + std::to_string(i) + ".";
        out.emplace_back(base + "wq", l.wq);
        out.emplace_back(base + "bq", l.bq);
        out.emplace_back(base + "wk", l.wk);
        out.emplace_back(base + "bk", l.bk);
        out.emplace_back(base + "wv", l.wv);
        out.emplace_back(base + "bv", l.bv);
        out.emplace_back(base + "wo", l.wo);
        out.emplace_back(base + "bo", l.bo);
        out.emplace_back(base + "tcn_w", l.tcn_w);
        out.emplace_back(base + "tcn_b", l.tcn_b);
    }
    if (da_) {
        out.emplace_back("da.linear_w", da_->linear_w);
        out.emplace_back("da.linear_b", da_->linear_b);
        out.emplace_back("da.conv_w", da_->conv_w);
        out.emplace_back("da.conv_b", da_->conv_b);
    }
    if (ta_) {
        out.emplace_back("ta.mlp_a_w", ta_->mlp_a_w);
        out.emplace_back("ta.mlp_a_b", ta_->mlp_a_b);
        out.emplace_back("ta.mlp_b_w", ta_->mlp_b_w);
        out.emplace_back("ta.mlp_b_b", ta_->mlp_b_b);
    }
    out.emplace_back("head.fuse_w", fuse_w_);
    out.emplace_back("head.fuse_b", fuse_b_);
    if (sal_w_) {
        out.emplace_back("head.sal_w", sal_w_);
        out.emplace_back("head.sal_b", sal_b_);
    }
    return out;
}

std::vector<TensorPtr> WdceModel::parameters() const {
    std::vector<TensorPtr> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

void WdceModel::zero_grad() {
    for (auto& p : parameters()) p->zero_grad();
}

LossBreakdown compute_loss(WdceModel& model, const ForwardResult& out,
                           const std::vector<std::size_t>& labels) {
    const TrainConfig& cfg = model.train_config();
    for (std::size_t label : labels) {
        if (label >= model.classes()) {
            throw std::invalid_argument("loss: label " + std::to_string(label) +
                                        " out of range for " + std::to_string(model.classes()) +
                                        " classes");
        }
    }

    LossBreakdown breakdown;
    auto ce_fuse = softmax_cross_entropy(out.logits_fuse, labels);
    breakdown.fuse = ce_fuse->item();

    if (!cfg.has_decoupling()) {
        // plain cross-entropy baseline
        breakdown.total = ce_fuse;
        return breakdown;
    }

    auto ce_salient = softmax_cross_entropy(out.logits_salient, labels);
    breakdown.salient = ce_salient->item();
    auto total = add(mul_scalar(ce_fuse, cfg.lambda_fuse),
                     mul_scalar(ce_salient, cfg.lambda_salient));

    if (cfg.use_pcl) {
        auto proto = prototype_loss(model.bank(), out.subtle_pooled, out.att_flat, labels,
                                    cfg.contrastive);
        breakdown.proto = proto->item();
        total = add(total, mul_scalar(proto, cfg.lambda_proto));
    }
    breakdown.total = total;
    return breakdown;
}

SgdOptimizer::SgdOptimizer(std::vector<TensorPtr> params, double learning_rate, double momentum,
                           double weight_decay)
    : params_(std::move(params)), lr_(learning_rate), momentum_(momentum),
      weight_decay_(weight_decay) {
    velocity_.reserve(params_.size());
    for (const auto& p : params_) velocity_.emplace_back(p->size(), 0.0);
}

void SgdOptimizer::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        p.ensure_grad();
        std::vector<double>& vel = velocity_[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = p.grad[j] + weight_decay_ * p.data[j];
            vel[j] = momentum_ * vel[j] + g;
            p.data[j] -= lr_ * vel[j];
        }
    }
}

void SgdOptimizer::restore_velocities(const std::vector<std::vector<double>>& v) {
    if (v.size() != velocity_.size()) {
        throw std::invalid_argument("optimizer restore: velocity count mismatch");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].size() != velocity_[i].size()) {
            throw std::invalid_argument("optimizer restore: velocity size mismatch at " +
                                        std::to_string(i));
        }
    }
    velocity_ = v;
}

StepMetrics train_step(WdceModel& model, SgdOptimizer& opt, const TensorPtr& batch,
                       const std::vector<std::size_t>& labels) {
    model.zero_grad();

    Graph graph;
    ForwardResult out;
    LossBreakdown loss;
    {
        auto scope = graph.activate();
        out = model.forward(batch);
        loss = compute_loss(model, out, labels);

        if (!std::isfinite(loss.fuse)) throw std::runtime_error("non-finite fused-head loss");
        if (!std::isfinite(loss.salient)) throw std::runtime_error("non-finite salient-head loss");
        if (!std::isfinite(loss.proto)) throw std::runtime_error("non-finite prototype loss");

        graph.backward(loss.total);
    }
    opt.step();

    const auto predictions = argmax_rows(out.logits_fuse);
    std::size_t correct = 0;
    std::vector<bool> mask(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        mask[i] = predictions[i] == labels[i];
        if (mask[i]) ++correct;
    }

    // prototypes track correctly classified samples regardless of the
    // optimizer's learning rate
    if (model.train_config().use_pcl) {
        model.bank().update(out.subtle_pooled, out.att_flat, labels, mask);
    }

    StepMetrics m;
    m.loss_total = loss.total->item();
    m.loss_fuse = loss.fuse;
    m.loss_salient = loss.salient;
    m.loss_proto = loss.proto;
    m.acc_fuse = double(correct) / double(labels.size());
    return m;
}

void run_training(WdceModel& model, SgdOptimizer& opt, const Dataset& train_data,
                  const StepCallback& on_step) {
    const TrainConfig& cfg = model.train_config();
    if (train_data.empty()) throw std::invalid_argument("run_training: empty dataset");

    const auto milestones = cfg.effective_milestones();

    // one seeded shuffle fixes the batch partition for the whole run, so
    // step t and step t + steps_per_epoch always process the same batch
    // and per-batch losses are comparable across epochs
    std::vector<std::size_t> indices(train_data.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, {0xE60C4u}));
    for (std::size_t i = indices.size(); i-- > 1;) {
        std::swap(indices[i], indices[shuffle_rng.below(i + 1)]);
    }

    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.learning_rate;
        for (std::size_t m : milestones) {
            if (epoch >= m) lr *= cfg.lr_decay;
        }
        opt.set_learning_rate(lr);

        for (std::size_t start = 0; start < indices.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(indices.size(), start + cfg.batch_size);
            std::vector<std::size_t> batch_idx(indices.begin() + long(start),
                                               indices.begin() + long(stop));
            auto [batch, labels] = make_batch(train_data, batch_idx);
            const StepMetrics metrics = train_step(model, opt, batch, labels);
            ++global_step;
            if (on_step) on_step(epoch, global_step, metrics);
        }
    }
}

namespace {

EvalResult eval_from_logits(const std::vector<std::vector<double>>& logits,
                            const std::vector<std::size_t>& labels, std::size_t classes) {
    EvalResult r;
    r.per_class.assign(classes, 0.0);
    std::vector<std::size_t> class_total(classes, 0);
    std::size_t correct = 0, pair_confused = 0;
    r.predictions.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j) {
            if (logits[i][j] > logits[i][best]) best = j;
        }
        r.predictions[i] = best;
        ++class_total[labels[i]];
        if (best == labels[i]) {
            ++correct;
            r.per_class[labels[i]] += 1.0;
        } else if ((labels[i] ^ 1u) == best) {
            ++pair_confused;  // predicted the confusable partner class
        }
    }
    for (std::size_t k = 0; k < classes; ++k) {
        r.per_class[k] = class_total[k] ? r.per_class[k] / double(class_total[k]) : 0.0;
    }
    r.accuracy = labels.empty() ? 0.0 : double(correct) / double(labels.size());
    r.within_pair_confusion = labels.empty() ? 0.0 : double(pair_confused) / double(labels.size());
    return r;
}

}  // namespace

EvalResult evaluate(WdceModel& model, const Dataset& data, std::size_t batch_size) {
    std::vector<WdceModel*> one{&model};
    return evaluate_ensemble(one, data, batch_size);
}

EvalResult evaluate_ensemble(std::vector<WdceModel*> models, const Dataset& joint_data,
                             std::size_t batch_size) {
    if (models.empty()) throw std::invalid_argument("evaluate: no models");
    if (batch_size == 0) throw std::invalid_argument("evaluate: batch size must be >= 1");
    const std::size_t classes = models[0]->classes();
    for (auto* m : models) {
        if (m->classes() != classes) throw std::invalid_argument("evaluate: class count mismatch");
    }

    std::vector<Dataset> views;
    views.reserve(models.size());
    for (auto* m : models) {
        views.push_back(derive_modality(joint_data, m->graph(), m->train_config().modality));
    }

    std::vector<std::vector<double>> logits(joint_data.size(), std::vector<double>(classes, 0.0));
    std::vector<std::size_t> labels(joint_data.size());
    for (std::size_t i = 0; i < joint_data.size(); ++i) {
        if (joint_data[i].label >= classes) {
            throw std::invalid_argument("evaluate: label " + std::to_string(joint_data[i].label) +
                                        " out of range for " + std::to_string(classes) + " classes");
        }
        labels[i] = joint_data[i].label;
    }

    for (std::size_t start = 0; start < joint_data.size(); start += batch_size) {
        const std::size_t stop = std::min(joint_data.size(), start + batch_size);
        std::vector<std::size_t> idx(stop - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            auto [batch, batch_labels] = make_batch(views[mi], idx);
            auto out = models[mi]->forward(batch);  // no active graph: plain inference
            for (std::size_t i = 0; i < idx.size(); ++i) {
                for (std::size_t j = 0; j < classes; ++j) {
                    logits[start + i][j] += out.logits_fuse->data[i * classes + j];
                }
            }
        }
    }
    const double inv = 1.0 / double(models.size());
    for (auto& row : logits) {
        for (double& v : row) v *= inv;
    }
    return eval_from_logits(logits, labels, classes);
}

namespace {

std::vector<std::size_t> bone_parents(const SkeletonGraph& graph) {
    const std::size_t v = graph.joints;
    std::vector<std::vector<std::size_t>> adj(v);
    for (const auto& [a, b] : graph.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<std::size_t> parent(v, v);  // v marks "unvisited"
    std::queue<std::size_t> frontier;
    parent[0] = 0;
    frontier.push(0);
    std::size_t visited = 1;
    while (!frontier.empty()) {
        const std::size_t u = frontier.front();
        frontier.pop();
        for (std::size_t w : adj[u]) {
            if (parent[w] == v) {
                parent[w] = u;
                frontier.push(w);
                ++visited;
            }
        }
    }
    if (visited != v) {
        throw std::invalid_argument("bone modality needs a connected skeleton; only " +
                                    std::to_string(visited) + " of " + std::to_string(v) +
                                    " joints reachable from the root");
    }
    return parent;
}

Dataset to_bones(const Dataset& data, const std::vector<std::size_t>& parent) {
    Dataset out = data;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const SkeletonSequence& src = data[i];
        SkeletonSequence& dst = out[i];
        for (std::size_t v = 0; v < src.joints; ++v) {
            const std::size_t p = parent[v];
            for (std::size_t t = 0; t < src.frames; ++t) {
                for (std::size_t c = 0; c < src.channels; ++c) {
                    dst.at(v, t, c) = (v == 0) ? 0.0 : src.at(v, t, c) - src.at(p, t, c);
                }
            }
        }
    }
    return out;
}

Dataset to_motion(const Dataset& data) {
    Dataset out = data;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const SkeletonSequence& src = data[i];
        SkeletonSequence& dst = out[i];
        for (std::size_t v = 0; v < src.joints; ++v) {
            for (std::size_t t = 0; t < src.frames; ++t) {
                for (std::size_t c = 0; c < src.channels; ++c) {
                    dst.at(v, t, c) =
                        (t + 1 < src.frames) ? src.at(v, t + 1, c) - src.at(v, t, c) : 0.0;
                }
            }
        }
    }
    return out;
}

}  // namespace

Dataset derive_modality(const Dataset& data, const SkeletonGraph& graph, Modality modality) {
    switch (modality) {
        case Modality::joint: return data;
        case Modality::bone: return to_bones(data, bone_parents(graph));
        case Modality::joint_motion: return to_motion(data);
        case Modality::bone_motion: return to_motion(to_bones(data, bone_parents(graph)));
    }
    throw std::logic_error("unknown modality");
}

// ---- checkpointing ----------------------------------------------------

namespace {
constexpr char kCheckpointMagic[4] = {'W', 'D', 'C', 'C'};
}

void save_checkpoint(const std::string& path, const WdceModel& model, const SgdOptimizer* opt,
                     const std::string& config_json) {
    const auto named = model.named_parameters();

    json manifest;
    manifest["format"] = "wdce-checkpoint";
    manifest["version"] = 1;
    manifest["config"] = json::parse(config_json);
    manifest["model"] = {{"classes", model.classes()},
                         {"in_channels", model.in_channels()},
                         {"frames", model.frames()},
                         {"joints", model.graph().joints},
                         {"feature_dim", model.feature_dim()}};
    json entries = json::array();
    for (const auto& [name, t] : named) entries.push_back(name);
    manifest["entries"] = entries;

    manifest["bank"]["present"] = model.has_bank();
    if (model.has_bank()) {
        const auto& bank = model.bank();
        manifest["bank"]["momentum"] = bank.momentum();
        manifest["bank"]["feat_dim"] = bank.feat_dim();
        manifest["bank"]["att_dim"] = bank.att_dim();
        json flags = json::array();
        for (bool b : bank.initialized()) flags.push_back(b);
        manifest["bank"]["initialized"] = flags;
    }
    manifest["optimizer"]["present"] = opt != nullptr;

    const std::string manifest_text = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(kCheckpointMagic, 4);
    write_u64(out, manifest_text.size());
    out.write(manifest_text.data(), std::streamsize(manifest_text.size()));
    for (const auto& [name, t] : named) write_tensor(out, *t);
    if (model.has_bank()) {
        write_tensor(out, *model.bank().feat_protos_tensor());
        write_tensor(out, *model.bank().att_protos_tensor());
    }
    if (opt != nullptr) {
        const auto& vels = opt->velocities();
        for (std::size_t i = 0; i < vels.size(); ++i) {
            Tensor t({vels[i].size()}, vels[i], false);
            write_tensor(out, t);
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);

    char magic[4] = {};
    read_bytes(in, magic, 4, 0);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic, expected \"WDCC\"", 0);
    }
    const std::uint64_t manifest_len = read_u64(in, 4);
    std::string manifest_text(manifest_len, '\0');
    read_bytes(in, manifest_text.data(), manifest_len, 12);

    json manifest;
    try {
        manifest = json::parse(manifest_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("unparseable checkpoint manifest: ") + e.what(), 12);
    }
    if (manifest.value("format", "") != "wdce-checkpoint") {
        throw FormatError("not a wdce checkpoint", 12);
    }

    CheckpointData ckpt;
    ckpt.config_json = manifest.at("config").dump();
    ckpt.classes = manifest.at("model").at("classes").get<std::size_t>();
    ckpt.in_channels = manifest.at("model").at("in_channels").get<std::size_t>();
    ckpt.frames = manifest.at("model").at("frames").get<std::size_t>();
    ckpt.joints = manifest.at("model").at("joints").get<std::size_t>();

    std::uint64_t offset = 12 + manifest_len;
    auto next_tensor = [&]() {
        TensorPtr t = read_tensor(in, offset);
        offset += 4 + 4 + 8 * t->rank() + 8 * t->size();
        return t;
    };

    for (const auto& name : manifest.at("entries")) {
        ckpt.entries.emplace_back(name.get<std::string>(), next_tensor());
    }
    ckpt.has_bank = manifest.at("bank").at("present").get<bool>();
    if (ckpt.has_bank) {
        ckpt.bank_momentum = manifest.at("bank").at("momentum").get<double>();
        for (const auto& b : manifest.at("bank").at("initialized")) {
            ckpt.bank_initialized.push_back(b.get<bool>());
        }
        ckpt.bank_feat = next_tensor();
        ckpt.bank_att = next_tensor();
    }
    ckpt.has_optimizer = manifest.at("optimizer").at("present").get<bool>();
    if (ckpt.has_optimizer) {
        for (std::size_t i = 0; i < ckpt.entries.size(); ++i) ckpt.velocities.push_back(next_tensor());
    }
    return ckpt;
}

void restore_model(WdceModel& model, const CheckpointData& ckpt) {
    auto named = model.named_parameters();
    if (named.size() != ckpt.entries.size()) {
        throw std::runtime_error("checkpoint/config mismatch: model has " +
                                 std::to_string(named.size()) + " parameters, checkpoint " +
                                 std::to_string(ckpt.entries.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        if (named[i].first != ckpt.entries[i].first) {
            throw std::runtime_error("checkpoint/config mismatch: parameter " + std::to_string(i) +
                                     " is \"" + named[i].first + "\" in the model but \"" +
                                     ckpt.entries[i].first + "\" in the checkpoint");
        }
        if (named[i].second->shape != ckpt.entries[i].second->shape) {
            throw std::runtime_error("checkpoint/config mismatch: shape of " + named[i].first +
                                     " is " + shape_str(named[i].second->shape) + " vs " +
                                     shape_str(ckpt.entries[i].second->shape));
        }
        named[i].second->data = ckpt.entries[i].second->data;
    }
    if (model.has_bank() != ckpt.has_bank) {
        throw std::runtime_error("checkpoint/config mismatch: prototype bank presence differs");
    }
    if (ckpt.has_bank) {
        model.bank().restore(ckpt.bank_feat, ckpt.bank_att, ckpt.bank_initialized,
                             ckpt.bank_momentum);
    }
}

void restore_optimizer(SgdOptimizer& opt, const CheckpointData& ckpt) {
    if (!ckpt.has_optimizer) throw std::runtime_error("checkpoint carries no optimizer state");
    std::vector<std::vector<double>> vels;
    vels.reserve(ckpt.velocities.size());
    for (const auto& t : ckpt.velocities) vels.push_back(t->data);
    opt.restore_velocities(vels);
}

}  // namespace wdce
