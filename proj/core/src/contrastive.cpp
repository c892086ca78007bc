#include "wdce/contrastive.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wdce/ops.hpp"
#include "wdce/serialize.hpp"

namespace wdce {

void ContrastiveConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0) {
        throw std::invalid_argument("contrastive weights must be nonnegative");
    }
    if (tau <= 0.0) {
        throw std::invalid_argument("contrastive temperature must be positive, got " +
                                    std::to_string(tau));
    }
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_similarity: lengths differ, " +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::domain_error("cosine_similarity: zero-norm vector (uninitialized prototype?)");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

PrototypeBank::PrototypeBank(std::size_t classes, std::size_t feat_dim, std::size_t att_dim,
                             double momentum)
    : classes_(classes), feat_dim_(feat_dim), att_dim_(att_dim), momentum_(momentum),
      feat_(classes * feat_dim, 0.0), att_(classes * att_dim, 0.0),
      initialized_(classes, false) {
    if (classes == 0 || feat_dim == 0) {
        throw std::invalid_argument("prototype bank needs at least one class and feature dim");
    }
    if (momentum <= 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("prototype momentum must lie in (0, 1), got " +
                                    std::to_string(momentum));
    }
}

bool PrototypeBank::all_initialized() const {
    for (bool b : initialized_) {
        if (!b) return false;
    }
    return true;
}

std::span<const double> PrototypeBank::feat_proto(std::size_t k) const {
    if (k >= classes_) throw std::out_of_range("prototype class out of range");
    return {feat_.data() + k * feat_dim_, feat_dim_};
}

std::span<const double> PrototypeBank::att_proto(std::size_t k) const {
    if (k >= classes_) throw std::out_of_range("prototype class out of range");
    return {att_.data() + k * att_dim_, att_dim_};
}

void PrototypeBank::update(const TensorPtr& subtle_feats, const TensorPtr& att_maps,
                           const std::vector<std::size_t>& labels,
                           const std::vector<bool>& correct) {
    if (!subtle_feats || subtle_feats->rank() != 2 || subtle_feats->shape[1] != feat_dim_) {
        throw std::invalid_argument("prototype update: features must be N x " +
                                    std::to_string(feat_dim_));
    }
    const std::size_t n = subtle_feats->shape[0];
    if (labels.size() != n || correct.size() != n) {
        throw std::invalid_argument("prototype update: labels/mask misaligned with batch");
    }
    if (att_maps) {
        if (att_dim_ == 0) {
            throw std::invalid_argument("prototype update: bank was built without attention slots");
        }
        if (att_maps->rank() != 2 || att_maps->shape[0] != n || att_maps->shape[1] != att_dim_) {
            throw std::invalid_argument("prototype update: attention maps must be N x " +
                                        std::to_string(att_dim_));
        }
    }
    for (std::size_t label : labels) {
        if (label >= classes_) {
            throw std::invalid_argument("prototype update: label " + std::to_string(label) +
                                        " out of range for " + std::to_string(classes_) + " classes");
        }
    }

    std::vector<double> feat_sum(classes_ * feat_dim_, 0.0);
    std::vector<double> att_sum(classes_ * att_dim_, 0.0);
    std::vector<std::size_t> counts(classes_, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!correct[i]) continue;
        const std::size_t k = labels[i];
        ++counts[k];
        for (std::size_t d = 0; d < feat_dim_; ++d) {
            feat_sum[k * feat_dim_ + d] += subtle_feats->data[i * feat_dim_ + d];
        }
        if (att_maps) {
            for (std::size_t d = 0; d < att_dim_; ++d) {
                att_sum[k * att_dim_ + d] += att_maps->data[i * att_dim_ + d];
            }
        }
    }

    for (std::size_t k = 0; k < classes_; ++k) {
        if (counts[k] == 0) continue;
        const double inv = 1.0 / static_cast<double>(counts[k]);
        if (!initialized_[k]) {
            for (std::size_t d = 0; d < feat_dim_; ++d) {
                feat_[k * feat_dim_ + d] = feat_sum[k * feat_dim_ + d] * inv;
            }
            if (att_maps) {
                for (std::size_t d = 0; d < att_dim_; ++d) {
                    att_[k * att_dim_ + d] = att_sum[k * att_dim_ + d] * inv;
                }
            }
            initialized_[k] = true;
        } else {
            const double m = momentum_;
            for (std::size_t d = 0; d < feat_dim_; ++d) {
                double& p = feat_[k * feat_dim_ + d];
                p = m * p + (1.0 - m) * feat_sum[k * feat_dim_ + d] * inv;
            }
            if (att_maps) {
                for (std::size_t d = 0; d < att_dim_; ++d) {
                    double& p = att_[k * att_dim_ + d];
                    p = m * p + (1.0 - m) * att_sum[k * att_dim_ + d] * inv;
                }
            }
        }
    }
}

TensorPtr PrototypeBank::feat_protos_tensor() const {
    return Tensor::from_data({classes_, feat_dim_}, feat_);
}

TensorPtr PrototypeBank::att_protos_tensor() const {
    if (att_dim_ == 0) return Tensor::zeros({classes_, 1});
    return Tensor::from_data({classes_, att_dim_}, att_);
}

void PrototypeBank::restore(const TensorPtr& feat, const TensorPtr& att,
                            const std::vector<bool>& initialized, double momentum) {
    if (!feat || feat->shape != Shape{classes_, feat_dim_}) {
        throw std::invalid_argument("prototype restore: feature prototype shape mismatch");
    }
    if (initialized.size() != classes_) {
        throw std::invalid_argument("prototype restore: flag count mismatch");
    }
    if (momentum <= 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("prototype restore: bad momentum");
    }
    feat_ = feat->data;
    if (att_dim_ > 0) {
        if (!att || att->shape != Shape{classes_, att_dim_}) {
            throw std::invalid_argument("prototype restore: attention prototype shape mismatch");
        }
        att_ = att->data;
    }
    initialized_ = initialized;
    momentum_ = momentum;
}

void save_bank(const std::string& path, const PrototypeBank& bank) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    char momentum[40];
    std::snprintf(momentum, sizeof(momentum), "%.17g", bank.momentum());
    out << "wdce-bank 1 " << bank.classes() << " " << bank.feat_dim() << " " << bank.att_dim()
        << " " << momentum;
    for (bool b : bank.initialized()) out << " " << (b ? 1 : 0);
    out << "\n";
    write_tensor(out, *bank.feat_protos_tensor());
    write_tensor(out, *bank.att_protos_tensor());
    if (!out) throw std::runtime_error("write failed for " + path);
}

PrototypeBank load_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw FormatError("missing bank header", 0);
    std::istringstream hs(header);
    std::string tag;
    int version = 0;
    std::size_t classes = 0, feat_dim = 0, att_dim = 0;
    double momentum = 0.0;
    if (!(hs >> tag >> version >> classes >> feat_dim >> att_dim >> momentum) ||
        tag != "wdce-bank" || version != 1) {
        throw FormatError("bad bank header \"" + header + "\"", 0);
    }
    std::vector<bool> flags(classes);
    for (std::size_t k = 0; k < classes; ++k) {
        int b = 0;
        if (!(hs >> b)) throw FormatError("bank header is missing initialized flags", 0);
        flags[k] = b != 0;
    }
    const std::uint64_t offset = header.size() + 1;
    auto feat = read_tensor(in, offset);
    const std::uint64_t feat_bytes = 8 + 8 * feat->rank() + 8 * feat->size();
    auto att = read_tensor(in, offset + feat_bytes);
    PrototypeBank bank(classes, feat_dim, att_dim, momentum);
    bank.restore(feat, att_dim > 0 ? att : nullptr, flags, momentum);
    return bank;
}

namespace {

// Normalized prototype rows as a constant (no-grad) K x D tensor.
TensorPtr normalized_constant(const std::vector<double>& flat, std::size_t k, std::size_t d,
                              const char* which) {
    std::vector<double> out(flat.size());
    for (std::size_t i = 0; i < k; ++i) {
        double nrm = 0.0;
        for (std::size_t j = 0; j < d; ++j) nrm += flat[i * d + j] * flat[i * d + j];
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) {
            throw std::domain_error(std::string("prototype_loss: zero-norm ") + which +
                                    " prototype for class " + std::to_string(i));
        }
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = flat[i * d + j] / nrm;
    }
    return Tensor::from_data({k, d}, std::move(out));
}

// -log softmax(sim / tau) at the true class, averaged over the batch.
TensorPtr similarity_term(const TensorPtr& x, const TensorPtr& protos_normalized, double tau,
                          const std::vector<std::size_t>& labels, const char* which) {
    const std::size_t n = x->shape[0], d = x->shape[1];
    for (std::size_t i = 0; i < n; ++i) {
        double nrm = 0.0;
        for (std::size_t j = 0; j < d; ++j) nrm += x->data[i * d + j] * x->data[i * d + j];
        if (nrm == 0.0) {
            throw std::domain_error(std::string("prototype_loss: zero-norm ") + which +
                                    " input at sample " + std::to_string(i));
        }
    }
    auto norms = l2_norm(x, 1, true);                       // N x 1
    auto unit = div(x, norms);                              // N x D
    auto sims = matmul(unit, transpose2d(protos_normalized));  // N x K
    return softmax_cross_entropy(mul_scalar(sims, 1.0 / tau), labels);
}

}  // namespace

TensorPtr prototype_loss(const PrototypeBank& bank, const TensorPtr& subtle_feats,
                         const TensorPtr& att_maps, const std::vector<std::size_t>& labels,
                         const ContrastiveConfig& cfg, bool strict) {
    cfg.validate();
    if (!subtle_feats || subtle_feats->rank() != 2 || subtle_feats->shape[1] != bank.feat_dim()) {
        throw std::invalid_argument("prototype_loss: features must be N x " +
                                    std::to_string(bank.feat_dim()));
    }
    if (labels.size() != subtle_feats->shape[0]) {
        throw std::invalid_argument("prototype_loss: labels misaligned with batch");
    }
    for (std::size_t label : labels) {
        if (label >= bank.classes()) {
            throw std::invalid_argument("prototype_loss: label " + std::to_string(label) +
                                        " out of range");
        }
    }
    if (!bank.all_initialized()) {
        if (strict) {
            throw std::runtime_error("prototype_loss: bank not fully initialized in strict mode");
        }
        return Tensor::scalar(0.0);
    }

    std::vector<double> feat_flat, att_flat;
    feat_flat.reserve(bank.classes() * bank.feat_dim());
    for (std::size_t k = 0; k < bank.classes(); ++k) {
        auto p = bank.feat_proto(k);
        feat_flat.insert(feat_flat.end(), p.begin(), p.end());
    }
    auto feat_protos = normalized_constant(feat_flat, bank.classes(), bank.feat_dim(), "feature");
    auto loss = mul_scalar(similarity_term(subtle_feats, feat_protos, cfg.tau, labels, "feature"),
                           cfg.alpha);

    if (att_maps) {
        if (!bank.has_att()) {
            throw std::invalid_argument("prototype_loss: bank has no attention prototypes");
        }
        if (att_maps->rank() != 2 || att_maps->shape[0] != subtle_feats->shape[0] ||
            att_maps->shape[1] != bank.att_dim()) {
            throw std::invalid_argument("prototype_loss: attention maps must be N x " +
                                        std::to_string(bank.att_dim()));
        }
        for (std::size_t k = 0; k < bank.classes(); ++k) {
            auto p = bank.att_proto(k);
            att_flat.insert(att_flat.end(), p.begin(), p.end());
        }
        auto att_protos = normalized_constant(att_flat, bank.classes(), bank.att_dim(), "attention");
        auto att_term = similarity_term(att_maps, att_protos, cfg.tau, labels, "attention");
        loss = add(loss, mul_scalar(att_term, cfg.beta));
    }
    return loss;
}

}  // namespace wdce
