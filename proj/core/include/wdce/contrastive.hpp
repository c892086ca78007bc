#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wdce/tensor.hpp"

namespace wdce {

struct ContrastiveConfig {
    double alpha = 0.9;  // weight of the feature term
    double beta = 0.1;   // weight of the attention term
    double tau = 0.1;    // softmax temperature
    void validate() const;
};

/// Cosine similarity of two equal-length vectors. Zero-norm operands are
/// rejected; they signal that an uninitialized prototype leaked into a
/// similarity computation.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Per-class running prototypes for pooled subtle features and flattened
/// attention maps. Prototypes are statistics, not parameters: the loss
/// treats them as constants and updates arrive only from correctly
/// classified samples.
class PrototypeBank {
public:
    PrototypeBank(std::size_t classes, std::size_t feat_dim, std::size_t att_dim,
                  double momentum = 0.9);

    std::size_t classes() const { return classes_; }
    std::size_t feat_dim() const { return feat_dim_; }
    std::size_t att_dim() const { return att_dim_; }
    double momentum() const { return momentum_; }
    bool has_att() const { return att_dim_ > 0; }

    const std::vector<bool>& initialized() const { return initialized_; }
    bool all_initialized() const;

    std::span<const double> feat_proto(std::size_t k) const;
    std::span<const double> att_proto(std::size_t k) const;

    /// EMA update from one batch. `att_maps` may be null when the model
    /// variant produces no attention maps. First correct batch for a class
    /// seeds the prototype with the class mean.
    void update(const TensorPtr& subtle_feats, const TensorPtr& att_maps,
                const std::vector<std::size_t>& labels, const std::vector<bool>& correct);

    // flat K x dim copies, for serialization
    TensorPtr feat_protos_tensor() const;
    TensorPtr att_protos_tensor() const;
    void restore(const TensorPtr& feat, const TensorPtr& att, const std::vector<bool>& initialized,
                 double momentum);

private:
    std::size_t classes_, feat_dim_, att_dim_;
    double momentum_;
    std::vector<double> feat_;  // K x feat_dim
    std::vector<double> att_;   // K x att_dim
    std::vector<bool> initialized_;
};

/// Standalone bank file: one text header line ("wdce-bank 1 K feat_dim
/// att_dim momentum flags...") followed by the two prototype matrices in
/// the tensor dump format.
void save_bank(const std::string& path, const PrototypeBank& bank);
PrototypeBank load_bank(const std::string& path);

/// Prototype contrastive loss: per sample, a temperature-scaled softmax
/// cross-entropy over cosine similarities to every class prototype, for
/// the feature bank (weight alpha) and, when attention maps are given,
/// the attention bank (weight beta). Returns a constant zero when the
/// bank is not fully initialized, unless `strict`. Gradients flow into
/// the inputs only, never into the bank.
TensorPtr prototype_loss(const PrototypeBank& bank, const TensorPtr& subtle_feats,
                         const TensorPtr& att_maps, const std::vector<std::size_t>& labels,
                         const ContrastiveConfig& cfg, bool strict = false);

}  // namespace wdce
