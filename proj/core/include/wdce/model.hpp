#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wdce/attention.hpp"
#include "wdce/backbone.hpp"
#include "wdce/contrastive.hpp"
#include "wdce/data.hpp"
#include "wdce/tensor.hpp"
#include "wdce/wavelet.hpp"

namespace wdce {

enum class Modality { joint, bone, joint_motion, bone_motion };
std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

/// All training hyperparameters plus the ablation switches that shape the
/// network. Zeroed lambda weights are allowed; switch combinations follow
/// the ablation grid (channel split replaces the wavelet split).
struct TrainConfig {
    double lambda_fuse = 0.4;
    double lambda_salient = 0.2;
    double lambda_proto = 0.4;
    ContrastiveConfig contrastive{};
    double proto_momentum = 0.9;

    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0004;
    std::vector<std::size_t> milestones{};  // empty: 60% and 80% of epochs
    double lr_decay = 0.1;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;

    std::size_t att_dim = 8;    // trajectory attention width
    std::size_t da_kernel = 3;  // decoupling attention conv kernel

    bool use_dwt = true;
    bool use_da = true;
    bool use_ta = true;
    bool use_pcl = true;
    bool use_channel_split = false;

    Modality modality = Modality::joint;

    void validate() const;
    std::vector<std::size_t> effective_milestones() const;
    /// True when the model splits features into salient/subtle paths.
    bool has_decoupling() const { return use_dwt || use_channel_split; }
};

struct ForwardResult {
    TensorPtr logits_fuse;     // N x K
    TensorPtr logits_salient;  // N x K, null for the undecoupled baseline
    TensorPtr subtle_pooled;   // N x D, null for the baseline
    TensorPtr salient_pooled;  // N x D, null for the baseline
    TensorPtr fused_pooled;    // N x D (embedding pooled for the baseline)
    TensorPtr att_flat;        // N x (C*V), null without trajectory attention
    AttentionMap att;          // empty without trajectory attention
    TensorPtr x_salient, x_subtle, x_fuse;  // N x C x T/2 x V, null for baseline
};

/// Full WDCE-Net: backbone, wavelet/channel decoupling, the two attention
/// blocks, classifier heads and the prototype bank. Components excluded
/// by the ablation switches are not allocated.
class WdceModel {
public:
    WdceModel(BackboneConfig backbone_cfg, TrainConfig train_cfg, SkeletonGraph graph,
              std::size_t in_channels, std::size_t frames, std::size_t classes);

    ForwardResult forward(const TensorPtr& batch);

    std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
    std::vector<TensorPtr> parameters() const;
    void zero_grad();

    const TrainConfig& train_config() const { return tcfg_; }
    const BackboneConfig& backbone_config() const { return bcfg_; }
    const SkeletonGraph& graph() const { return graph_; }
    std::size_t classes() const { return classes_; }
    std::size_t in_channels() const { return in_channels_; }
    std::size_t frames() const { return frames_; }
    /// Pooled feature width feeding the heads and the prototype bank.
    std::size_t feature_dim() const { return feature_dim_; }

    PrototypeBank& bank();
    const PrototypeBank& bank() const;
    bool has_bank() const { return bank_.has_value(); }

private:
    BackboneConfig bcfg_;
    TrainConfig tcfg_;
    SkeletonGraph graph_;
    std::size_t in_channels_, frames_, classes_, feature_dim_;

    BackboneParams backbone_;
    std::optional<HaarFilterPair> haar_;
    std::optional<DecouplingAttentionParams> da_;
    std::optional<TrajectoryAttentionParams> ta_;
    TensorPtr fuse_w_, fuse_b_;
    TensorPtr sal_w_, sal_b_;
    std::optional<PrototypeBank> bank_;
};

/// First C/2 channels to the salient path, rest to the subtle path, with
/// pairwise temporal averaging down to T/2 so shapes match the DWT path.
std::pair<TensorPtr, TensorPtr> channel_split_control(const TensorPtr& x_embed);

struct LossBreakdown {
    TensorPtr total;
    double fuse = 0.0;
    double salient = 0.0;
    double proto = 0.0;
};

/// Weighted objective: lambda_fuse * CE(fuse) + lambda_salient *
/// CE(salient) + lambda_proto * prototype loss. The undecoupled baseline
/// trains on plain CE of its single head.
LossBreakdown compute_loss(WdceModel& model, const ForwardResult& out,
                           const std::vector<std::size_t>& labels);

/// SGD with momentum; weight decay enters the gradient as an L2 term.
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<TensorPtr> params, double learning_rate, double momentum,
                 double weight_decay);

    void step();
    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }
    const std::vector<std::vector<double>>& velocities() const { return velocity_; }
    void restore_velocities(const std::vector<std::vector<double>>& v);

private:
    std::vector<TensorPtr> params_;
    double lr_, momentum_, weight_decay_;
    std::vector<std::vector<double>> velocity_;
};

struct StepMetrics {
    double loss_total = 0.0, loss_fuse = 0.0, loss_salient = 0.0, loss_proto = 0.0;
    double acc_fuse = 0.0;
};

/// One optimization step: forward, loss, backward, SGD update, then the
/// prototype update gated on fused-head correctness. Non-finite loss
/// components abort with the offending term named.
StepMetrics train_step(WdceModel& model, SgdOptimizer& opt, const TensorPtr& batch,
                       const std::vector<std::size_t>& labels);

using StepCallback = std::function<void(std::size_t epoch, std::size_t step, const StepMetrics&)>;

/// Epoch/batch loop with per-epoch shuffling and the milestone learning
/// rate schedule. Deterministic for a fixed config.
void run_training(WdceModel& model, SgdOptimizer& opt, const Dataset& train_data,
                  const StepCallback& on_step = nullptr);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class;
    /// Fraction of all samples predicted as their confusable-pair partner.
    double within_pair_confusion = 0.0;
    std::vector<std::size_t> predictions;
};

EvalResult evaluate(WdceModel& model, const Dataset& data, std::size_t batch_size);

/// Score-level fusion: fused-head logits averaged across models, each fed
/// its own modality derived from the same underlying joint data.
EvalResult evaluate_ensemble(std::vector<WdceModel*> models, const Dataset& joint_data,
                             std::size_t batch_size);

/// Bone vectors come from a BFS spanning tree rooted at joint 0; motion is
/// the forward temporal difference with a zero final frame.
Dataset derive_modality(const Dataset& data, const SkeletonGraph& graph, Modality modality);

// ---- checkpointing ----------------------------------------------------
// Container: magic "WDCC", u64 manifest length, JSON manifest, then the
// named tensor dumps in manifest order.

struct CheckpointData {
    std::string config_json;
    std::vector<std::pair<std::string, TensorPtr>> entries;
    bool has_bank = false;
    TensorPtr bank_feat, bank_att;
    std::vector<bool> bank_initialized;
    double bank_momentum = 0.9;
    bool has_optimizer = false;
    std::vector<TensorPtr> velocities;
    std::size_t classes = 0, in_channels = 0, frames = 0, joints = 0;
};

void save_checkpoint(const std::string& path, const WdceModel& model, const SgdOptimizer* opt,
                     const std::string& config_json);
CheckpointData read_checkpoint(const std::string& path);
/// Copies weights (and bank state) into a freshly constructed model;
/// names and shapes must match exactly.
void restore_model(WdceModel& model, const CheckpointData& ckpt);
void restore_optimizer(SgdOptimizer& opt, const CheckpointData& ckpt);

}  // namespace wdce
