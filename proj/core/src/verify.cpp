#include "wdce/verify.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "wdce/attention.hpp"
#include "wdce/backbone.hpp"
#include "wdce/contrastive.hpp"
#include "wdce/grad_check.hpp"
#include "wdce/model.hpp"
#include "wdce/ops.hpp"
#include "wdce/rng.hpp"
#include "wdce/wavelet.hpp"

namespace wdce {

namespace {

PropertyCheck make_check(std::string name, double max_error, double tolerance,
                         std::string detail = "") {
    PropertyCheck c;
    c.name = std::move(name);
    c.max_error = max_error;
    c.tolerance = tolerance;
    c.passed = max_error < tolerance;
    c.detail = std::move(detail);
    return c;
}

TensorPtr random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                        bool requires_grad = false) {
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(values), requires_grad);
}

// Random values bounded away from zero, for relu kinks and divisors.
TensorPtr random_signed_tensor(Shape shape, Rng& rng, double lo_mag, double hi_mag,
                               bool requires_grad = false) {
    std::vector<double> values(shape_size(shape));
    for (double& v : values) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        v = sign * rng.uniform(lo_mag, hi_mag);
    }
    return Tensor::from_data(std::move(shape), std::move(values), requires_grad);
}

// Finite-difference probes must not cross a relu kink, so layer checks
// run at a point where every preactivation is strictly positive: inputs
// and the weights feeding relus made positive with a floor.
void make_positive(const TensorPtr& t, double floor_value) {
    for (double& v : t->data) v = std::fabs(v) + floor_value;
}

double max_abs_diff(const TensorPtr& a, const TensorPtr& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a->size(); ++i) {
        worst = std::max(worst, std::fabs(a->data[i] - b->data[i]));
    }
    return worst;
}

// scalar probe loss: weighted sum with fixed random weights so every
// output coordinate contributes a distinct gradient
TensorPtr weighted_sum(const TensorPtr& x, const TensorPtr& weights) {
    return sum(mul(x, weights), {});
}

}  // namespace

std::vector<PropertyCheck> verify_wavelet() {
    std::vector<PropertyCheck> checks;
    const std::vector<std::size_t> frame_sweep{2, 4, 8, 16, 32, 64};

    // filter algebra
    double algebra_err = 0.0;
    double structure_err = 0.0;
    for (std::size_t frames : frame_sweep) {
        const auto f = build_haar(frames);
        const std::size_t half = frames / 2;
        const double s = 1.0 / std::sqrt(2.0);
        for (std::size_t j = 0; j < half; ++j) {
            for (std::size_t t = 0; t < frames; ++t) {
                const double expect_low = (t == 2 * j || t == 2 * j + 1) ? s : 0.0;
                const double expect_high = (t == 2 * j) ? s : (t == 2 * j + 1) ? -s : 0.0;
                structure_err = std::max(structure_err,
                                         std::fabs(f.low->data[t * half + j] - expect_low));
                structure_err = std::max(structure_err,
                                         std::fabs(f.high->data[t * half + j] - expect_high));
            }
        }
        auto ltl = matmul(transpose2d(f.low), f.low);
        auto hth = matmul(transpose2d(f.high), f.high);
        auto lth = matmul(transpose2d(f.low), f.high);
        auto completeness = add(matmul(f.low, transpose2d(f.low)),
                                matmul(f.high, transpose2d(f.high)));
        for (std::size_t i = 0; i < half; ++i) {
            for (std::size_t j = 0; j < half; ++j) {
                const double eye = i == j ? 1.0 : 0.0;
                algebra_err = std::max(algebra_err, std::fabs(ltl->data[i * half + j] - eye));
                algebra_err = std::max(algebra_err, std::fabs(hth->data[i * half + j] - eye));
                algebra_err = std::max(algebra_err, std::fabs(lth->data[i * half + j]));
            }
        }
        for (std::size_t i = 0; i < frames; ++i) {
            for (std::size_t j = 0; j < frames; ++j) {
                const double eye = i == j ? 1.0 : 0.0;
                algebra_err = std::max(algebra_err,
                                       std::fabs(completeness->data[i * frames + j] - eye));
            }
        }
    }
    checks.push_back(make_check("wavelet.filter_structure", structure_err, 1e-12));
    checks.push_back(make_check("wavelet.filter_algebra", algebra_err, 1e-12));

    // perfect reconstruction + Parseval over random trajectories
    double recon_err = 0.0;
    double parseval_err = 0.0;
    Rng rng(20240001);
    for (std::size_t frames : frame_sweep) {
        const auto f = build_haar(frames);
        for (int trial = 0; trial < 100; ++trial) {
            auto x = random_tensor({3, frames}, rng, -2.0, 2.0);
            auto bands = dwt(x, f);
            auto back = idwt(bands.low, bands.high, f);
            recon_err = std::max(recon_err, max_abs_diff(x, back));

            double ex = 0.0, eb = 0.0;
            for (double v : x->data) ex += v * v;
            for (double v : bands.low->data) eb += v * v;
            for (double v : bands.high->data) eb += v * v;
            parseval_err = std::max(parseval_err, std::fabs(ex - eb) / std::max(1.0, ex));
        }
    }
    checks.push_back(make_check("wavelet.reconstruction", recon_err, 1e-10));
    checks.push_back(make_check("wavelet.parseval", parseval_err, 1e-10));

    // linearity
    {
        const auto f = build_haar(16);
        double err = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            auto x = random_tensor({4, 16}, rng);
            auto y = random_tensor({4, 16}, rng);
            const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
            auto mixed = add(mul_scalar(x, a), mul_scalar(y, b));
            auto bands_mixed = dwt(mixed, f);
            auto bands_x = dwt(x, f);
            auto bands_y = dwt(y, f);
            auto low_combo = add(mul_scalar(bands_x.low, a), mul_scalar(bands_y.low, b));
            auto high_combo = add(mul_scalar(bands_x.high, a), mul_scalar(bands_y.high, b));
            err = std::max(err, max_abs_diff(bands_mixed.low, low_combo));
            err = std::max(err, max_abs_diff(bands_mixed.high, high_combo));
        }
        checks.push_back(make_check("wavelet.linearity", err, 1e-12));
    }

    // band assignment edge cases
    {
        const auto f = build_haar(8);
        std::vector<double> alternating(8), constant(8, 0.75);
        for (std::size_t t = 0; t < 8; ++t) alternating[t] = (t % 2 == 0) ? 1.25 : -1.25;
        auto bands_alt = dwt(Tensor::from_data({1, 8}, alternating), f);
        auto bands_const = dwt(Tensor::from_data({1, 8}, constant), f);
        double err = 0.0;
        for (double v : bands_alt.low->data) err = std::max(err, std::fabs(v));
        for (double v : bands_const.high->data) err = std::max(err, std::fabs(v));
        for (double v : bands_const.low->data) {
            err = std::max(err, std::fabs(v - 0.75 * std::sqrt(2.0)));
        }
        checks.push_back(make_check("wavelet.band_assignment", err, 1e-12));
    }

    return checks;
}

namespace {

double grad_sweep(const std::function<double(std::uint64_t)>& one_seed, int seeds = 10) {
    double worst = 0.0;
    for (int s = 1; s <= seeds; ++s) worst = std::max(worst, one_seed(std::uint64_t(s)));
    return worst;
}

double check_full_model_loss() {
    BackboneConfig bcfg;
    bcfg.n_stgc = 1;
    bcfg.n_ssa = 1;
    bcfg.channels = {8};
    bcfg.heads = 2;
    bcfg.tcn_kernel = 3;

    TrainConfig tcfg;
    tcfg.seed = 7;
    tcfg.att_dim = 4;
    tcfg.da_kernel = 3;
    tcfg.epochs = 1;

    WdceModel model(bcfg, tcfg, toy_skeleton(5), 3, 8, 3);

    // positive batch and positive backbone weights keep every relu
    // strictly active: finite differences stay on one side of the kinks
    for (auto& [name, param] : model.named_parameters()) {
        if (name.rfind("backbone.", 0) == 0) make_positive(param, 0.02);
    }

    // fully initialized bank held constant during the check
    Rng proto_rng(99);
    auto feat = random_tensor({3, model.feature_dim()}, proto_rng, 0.2, 1.0);
    auto att = random_tensor({3, model.feature_dim() * 5}, proto_rng, 0.2, 1.0);
    model.bank().restore(feat, att, {true, true, true}, 0.9);

    Rng data_rng(31);
    auto batch = random_tensor({2, 3, 8, 5}, data_rng, 0.1, 1.0, true);
    const std::vector<std::size_t> labels{0, 2};

    auto f = [&]() {
        auto out = model.forward(batch);
        return compute_loss(model, out, labels).total;
    };
    std::vector<TensorPtr> inputs = model.parameters();
    inputs.push_back(batch);
    return grad_check(f, inputs, 1e-6);
}

}  // namespace

std::vector<PropertyCheck> verify_grad() {
    std::vector<PropertyCheck> checks;
    const double tol = 1e-5;

    auto push = [&](const std::string& name, double err) {
        checks.push_back(make_check("grad." + name, err, tol));
    };

    // ---- individual ops, 10 random seeds each ----
    push("add", grad_sweep([](std::uint64_t s) {
        Rng rng(s);
        auto a = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto b = random_tensor({3, 4}, rng, -1, 1, true);
        auto w = random_tensor({2, 3, 4}, rng);
        return grad_check([&]() { return weighted_sum(add(a, b), w); }, {a, b});
    }));
    push("sub", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 100);
        auto a = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto b = random_tensor({4}, rng, -1, 1, true);
        auto w = random_tensor({2, 3, 4}, rng);
        return grad_check([&]() { return weighted_sum(sub(a, b), w); }, {a, b});
    }));
    push("mul", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 200);
        auto a = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto b = random_tensor({2, 1, 4}, rng, -1, 1, true);
        auto w = random_tensor({2, 3, 4}, rng);
        return grad_check([&]() { return weighted_sum(mul(a, b), w); }, {a, b});
    }));
    push("div", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 300);
        auto a = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto b = random_signed_tensor({3, 4}, rng, 0.5, 1.5, true);
        auto w = random_tensor({2, 3, 4}, rng);
        return grad_check([&]() { return weighted_sum(div(a, b), w); }, {a, b});
    }));
    push("matmul", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 400);
        auto a = random_tensor({3, 4}, rng, -1, 1, true);
        auto b = random_tensor({4, 5}, rng, -1, 1, true);
        auto w = random_tensor({3, 5}, rng);
        return grad_check([&]() { return weighted_sum(matmul(a, b), w); }, {a, b});
    }));
    push("bmm", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 500);
        auto a = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto b = random_tensor({2, 4, 5}, rng, -1, 1, true);
        auto w = random_tensor({2, 3, 5}, rng);
        return grad_check([&]() { return weighted_sum(bmm(a, b), w); }, {a, b});
    }));
    push("conv1d", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 600);
        auto x = random_tensor({2, 3, 8}, rng, -1, 1, true);
        auto w = random_tensor({4, 3, 3}, rng, -1, 1, true);
        auto b = random_tensor({4}, rng, -1, 1, true);
        auto probe = random_tensor({2, 4, 8}, rng);
        return grad_check([&]() { return weighted_sum(conv1d(x, w, b, 1), probe); }, {x, w, b});
    }));
    push("conv2d", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 700);
        auto x = random_tensor({2, 3, 6, 5}, rng, -1, 1, true);
        auto w = random_tensor({4, 3, 3, 1}, rng, -1, 1, true);
        auto b = random_tensor({4}, rng, -1, 1, true);
        auto probe = random_tensor({2, 4, 6, 5}, rng);
        return grad_check([&]() { return weighted_sum(conv2d(x, w, b, 1, 0), probe); }, {x, w, b});
    }));
    push("reshape_permute", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 800);
        auto x = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto w = random_tensor({4, 6}, rng);
        return grad_check([&]() { return weighted_sum(reshape(permute(x, {2, 0, 1}), {4, 6}), w); },
                          {x});
    }));
    push("broadcast", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 900);
        auto x = random_tensor({3, 1}, rng, -1, 1, true);
        auto w = random_tensor({2, 3, 4}, rng);
        return grad_check([&]() { return weighted_sum(broadcast_to(x, {2, 3, 4}), w); }, {x});
    }));
    push("mean", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1000);
        auto x = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto w = random_tensor({2, 4}, rng);
        return grad_check([&]() { return weighted_sum(mean(x, {1}), w); }, {x});
    }));
    push("sum", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1100);
        auto x = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto w = random_tensor({3}, rng);
        return grad_check([&]() { return weighted_sum(sum(x, {0, 2}), w); }, {x});
    }));
    push("l2_norm", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1200);
        auto x = random_signed_tensor({3, 4}, rng, 0.2, 1.5, true);
        auto w = random_tensor({3, 1}, rng);
        return grad_check([&]() { return weighted_sum(l2_norm(x, 1, true), w); }, {x});
    }));
    push("relu", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1300);
        auto x = random_signed_tensor({2, 3, 4}, rng, 0.1, 1.0, true);  // away from the kink
        auto w = random_tensor({2, 3, 4}, rng);
        return grad_check([&]() { return weighted_sum(relu(x), w); }, {x});
    }));
    push("sigmoid", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1400);
        auto x = random_tensor({2, 3, 4}, rng, -2, 2, true);
        auto w = random_tensor({2, 3, 4}, rng);
        return grad_check([&]() { return weighted_sum(sigmoid(x), w); }, {x});
    }));
    push("softmax", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1500);
        auto x = random_tensor({2, 5, 3}, rng, -2, 2, true);
        auto w = random_tensor({2, 5, 3}, rng);
        return grad_check([&]() { return weighted_sum(softmax(x, 1), w); }, {x});
    }));
    push("log_softmax", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1600);
        auto x = random_tensor({4, 6}, rng, -2, 2, true);
        auto w = random_tensor({4, 6}, rng);
        return grad_check([&]() { return weighted_sum(log_softmax(x, 1), w); }, {x});
    }));
    push("log", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1700);
        auto x = random_tensor({2, 3}, rng, 0.2, 2.0, true);
        auto w = random_tensor({2, 3}, rng);
        return grad_check([&]() { return weighted_sum(wdce::log(x), w); }, {x});
    }));
    push("exp", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1800);
        auto x = random_tensor({2, 3}, rng, -1.0, 1.0, true);
        auto w = random_tensor({2, 3}, rng);
        return grad_check([&]() { return weighted_sum(wdce::exp(x), w); }, {x});
    }));
    push("concat", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 1900);
        auto a = random_tensor({2, 3, 4}, rng, -1, 1, true);
        auto b = random_tensor({2, 2, 4}, rng, -1, 1, true);
        auto w = random_tensor({2, 5, 4}, rng);
        return grad_check([&]() { return weighted_sum(concat({a, b}, 1), w); }, {a, b});
    }));
    push("slice", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 2000);
        auto x = random_tensor({2, 5, 3}, rng, -1, 1, true);
        auto w = random_tensor({2, 2, 3}, rng);
        return grad_check([&]() { return weighted_sum(slice(x, 1, 1, 3), w); }, {x});
    }));
    push("softmax_cross_entropy", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 2100);
        auto x = random_tensor({4, 3}, rng, -2, 2, true);
        const std::vector<std::size_t> labels{0, 2, 1, 2};
        return grad_check([&]() { return softmax_cross_entropy(x, labels); }, {x});
    }));

    // ---- layers in isolation ----
    push("layer.dwt_idwt", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 3000);
        const auto filters = build_haar(8);
        auto x = random_tensor({2, 3, 8}, rng, -1, 1, true);
        auto wl = random_tensor({2, 3, 4}, rng);
        auto wh = random_tensor({2, 3, 4}, rng);
        auto wr = random_tensor({2, 3, 8}, rng);
        return grad_check(
            [&]() {
                auto bands = dwt(x, filters);
                auto recon = idwt(bands.low, bands.high, filters);
                return add(add(weighted_sum(bands.low, wl), weighted_sum(bands.high, wh)),
                           weighted_sum(recon, wr));
            },
            {x});
    }, 5));
    push("layer.st_gc", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 3100);
        BackboneConfig cfg;
        cfg.n_stgc = 1;
        cfg.n_ssa = 0;
        cfg.channels = {4};
        cfg.heads = 2;
        cfg.tcn_kernel = 3;
        auto params = BackboneParams::init(cfg, 4, rng);
        make_positive(params.stgc[0].gcn_w, 0.02);
        make_positive(params.stgc[0].gcn_b, 0.05);
        make_positive(params.stgc[0].tcn_w, 0.02);
        make_positive(params.stgc[0].tcn_b, 0.05);
        const auto graph = toy_skeleton(5);
        auto x = random_tensor({2, 4, 6, 5}, rng, 0.1, 1.0, true);  // residual path active
        auto w = random_tensor({2, 4, 6, 5}, rng);
        auto inputs = params.stgc[0].parameters();
        inputs.push_back(x);
        return grad_check(
            [&]() { return weighted_sum(st_gc_layer(x, graph, params.stgc[0]), w); }, inputs);
    }, 5));
    push("layer.ssa_tformer", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 3200);
        BackboneConfig cfg;
        cfg.n_stgc = 1;
        cfg.n_ssa = 1;
        cfg.channels = {4};
        cfg.heads = 2;
        cfg.tcn_kernel = 3;
        auto params = BackboneParams::init(cfg, 4, rng);
        // scores may take any sign (softmax is smooth); the value/output
        // maps and the TCN stay positive so its relu never crosses zero
        make_positive(params.ssa[0].wv, 0.02);
        make_positive(params.ssa[0].bv, 0.05);
        make_positive(params.ssa[0].wo, 0.02);
        make_positive(params.ssa[0].bo, 0.05);
        make_positive(params.ssa[0].tcn_w, 0.02);
        make_positive(params.ssa[0].tcn_b, 0.05);
        auto x = random_tensor({2, 4, 6, 5}, rng, 0.1, 1.0, true);
        auto w = random_tensor({2, 4, 6, 5}, rng);
        auto inputs = params.ssa[0].parameters();
        inputs.push_back(x);
        return grad_check(
            [&]() { return weighted_sum(ssa_tformer_layer(x, params.ssa[0]), w); }, inputs);
    }, 5));
    push("layer.decoupling_attention", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 3300);
        auto params = DecouplingAttentionParams::init(4, 8, 3, rng);
        const auto filters = build_haar(8);
        auto x = random_tensor({2, 4, 8, 5}, rng, -1, 1, true);
        auto ws = random_tensor({2, 4, 4, 5}, rng);
        auto wt = random_tensor({2, 4, 4, 5}, rng);
        auto inputs = params.parameters();
        inputs.push_back(x);
        return grad_check(
            [&]() {
                auto bands = dwt(feature_to_trajectory_layout(x), filters);
                auto d = decoupling_attention(x, bands.low, bands.high, params);
                return add(weighted_sum(d.salient, ws), weighted_sum(d.subtle, wt));
            },
            inputs);
    }, 5));
    push("layer.trajectory_attention", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 3400);
        auto params = TrajectoryAttentionParams::init(3, 5, 4, rng);
        auto x = random_tensor({2, 3, 4, 5}, rng, -1, 1, true);
        auto w = random_tensor({2, 3, 4, 5}, rng);
        auto inputs = params.parameters();
        inputs.push_back(x);
        return grad_check(
            [&]() { return weighted_sum(trajectory_attention(x, params).enhanced, w); }, inputs);
    }, 5));
    push("layer.prototype_loss", grad_sweep([](std::uint64_t s) {
        Rng rng(s + 3500);
        PrototypeBank bank(3, 6, 10, 0.9);
        auto feat_protos = random_signed_tensor({3, 6}, rng, 0.2, 1.0);
        auto att_protos = random_tensor({3, 10}, rng, 0.1, 1.0);
        bank.restore(feat_protos, att_protos, {true, true, true}, 0.9);
        auto feats = random_signed_tensor({4, 6}, rng, 0.2, 1.0, true);
        auto atts = random_tensor({4, 10}, rng, 0.1, 1.0, true);
        const std::vector<std::size_t> labels{0, 1, 2, 0};
        ContrastiveConfig cfg;
        return grad_check(
            [&]() { return prototype_loss(bank, feats, atts, labels, cfg); }, {feats, atts});
    }, 5));

    checks.push_back(make_check("grad.full_model_loss", check_full_model_loss(), tol));
    return checks;
}

std::vector<PropertyCheck> verify_attention() {
    std::vector<PropertyCheck> checks;

    // trained-shape random case: normalization and gate range
    {
        Rng rng(501);
        const std::size_t n = 3, c = 6, t = 8, v = 5;
        auto da = DecouplingAttentionParams::init(c, t, 3, rng);
        auto ta = TrajectoryAttentionParams::init(c, v, 4, rng);
        const auto filters = build_haar(t);

        double row_err = 0.0, range_err = 1.0;
        double min_gate = 1.0, max_gate = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            auto x = random_tensor({n, c, t, v}, rng, -1.5, 1.5);
            auto bands = dwt(feature_to_trajectory_layout(x), filters);
            auto d = decoupling_attention(x, bands.low, bands.high, da);
            for (double g : d.weight_low->data) {
                min_gate = std::min(min_gate, g);
                max_gate = std::max(max_gate, g);
            }
            for (double g : d.weight_high->data) {
                min_gate = std::min(min_gate, g);
                max_gate = std::max(max_gate, g);
            }
            auto res = trajectory_attention(d.subtle, ta);
            row_err = std::max(row_err, res.att.max_row_sum_error());
            for (double p : res.att.values->data) {
                if (p <= 0.0 || p >= 1.0) range_err = 0.0;
            }
        }
        checks.push_back(make_check("attention.row_normalization", row_err, 1e-10));
        const bool gates_in_range = min_gate > 0.0 && max_gate < 1.0;
        checks.push_back(make_check("attention.gate_range", gates_in_range ? 0.0 : 1.0, 0.5,
                                    "gates in (" + std::to_string(min_gate) + ", " +
                                        std::to_string(max_gate) + ")"));
        checks.push_back(make_check("attention.att_open_interval", range_err == 1.0 ? 0.0 : 1.0, 0.5));
    }

    // zero-parameter degenerate values
    {
        const std::size_t n = 2, c = 4, t = 8, v = 5;
        DecouplingAttentionParams da;
        da.kernel = 3;
        da.linear_w = Tensor::zeros({t, t / 2}, true);
        da.linear_b = Tensor::zeros({t / 2}, true);
        da.conv_w = Tensor::zeros({2, c, 3}, true);
        da.conv_b = Tensor::zeros({2}, true);

        Rng rng(777);
        auto x = random_tensor({n, c, t, v}, rng);
        const auto filters = build_haar(t);
        auto bands = dwt(feature_to_trajectory_layout(x), filters);
        auto d = decoupling_attention(x, bands.low, bands.high, da);

        double err = 0.0;
        for (double g : d.weight_low->data) err = std::max(err, std::fabs(g - 0.5));
        for (double g : d.weight_high->data) err = std::max(err, std::fabs(g - 0.5));
        auto low_feat = band_to_feature_layout(bands.low, c, v);
        auto high_feat = band_to_feature_layout(bands.high, c, v);
        for (std::size_t i = 0; i < d.salient->size(); ++i) {
            err = std::max(err, std::fabs(d.salient->data[i] - 0.5 * low_feat->data[i]));
            err = std::max(err, std::fabs(d.subtle->data[i] - 0.5 * high_feat->data[i]));
        }
        checks.push_back(make_check("attention.zero_params_halve_bands", err, 1e-12));

        TrajectoryAttentionParams ta;
        ta.mlp_a_w = Tensor::zeros({v, 4}, true);
        ta.mlp_a_b = Tensor::zeros({4}, true);
        ta.mlp_b_w = Tensor::zeros({c, 4}, true);
        ta.mlp_b_b = Tensor::zeros({4}, true);
        auto res = trajectory_attention(d.subtle, ta);
        double uni_err = 0.0;
        for (double p : res.att.values->data) uni_err = std::max(uni_err, std::fabs(p - 1.0 / v));
        for (std::size_t i = 0; i < res.enhanced->size(); ++i) {
            uni_err = std::max(uni_err,
                               std::fabs(res.enhanced->data[i] - d.subtle->data[i] / double(v)));
        }
        checks.push_back(make_check("attention.zero_params_uniform", uni_err, 1e-12));
    }

    // argmax invariance under positive rescaling (biases zero)
    {
        Rng rng(909);
        const std::size_t n = 2, c = 4, t = 6, v = 5;
        TrajectoryAttentionParams ta = TrajectoryAttentionParams::init(c, v, 4, rng);
        ta.mlp_a_b = Tensor::zeros({4}, true);
        ta.mlp_b_b = Tensor::zeros({4}, true);
        double mismatches = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            auto x = random_signed_tensor({n, c, t, v}, rng, 0.1, 1.0);
            const double scale = rng.uniform(0.2, 5.0);
            auto scaled = mul_scalar(x, scale);
            auto base = trajectory_attention(x, ta).att.values;
            auto resc = trajectory_attention(scaled, ta).att.values;
            for (std::size_t row = 0; row < n * c; ++row) {
                std::size_t best_a = 0, best_b = 0;
                for (std::size_t j = 1; j < v; ++j) {
                    if (base->data[row * v + j] > base->data[row * v + best_a]) best_a = j;
                    if (resc->data[row * v + j] > resc->data[row * v + best_b]) best_b = j;
                }
                if (best_a != best_b) mismatches += 1.0;
            }
        }
        checks.push_back(make_check("attention.argmax_scale_invariance", mismatches, 0.5));
    }

    return checks;
}

std::vector<PropertyCheck> verify_contrastive() {
    std::vector<PropertyCheck> checks;

    // equidistant two-class case: ln 2
    {
        PrototypeBank bank(2, 2, 0, 0.9);
        bank.restore(Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0}), nullptr, {true, true}, 0.9);
        auto x = Tensor::from_data({1, 2}, {1.0, 1.0});  // equal similarity to both
        ContrastiveConfig cfg;
        cfg.alpha = 1.0;
        cfg.beta = 0.0;
        cfg.tau = 0.7;  // any temperature: equal logits stay equal
        auto loss = prototype_loss(bank, x, nullptr, {0}, cfg);
        checks.push_back(make_check("contrastive.equidistant_ln2",
                                    std::fabs(loss->item() - std::log(2.0)), 1e-9));
    }

    // own similarity 1, other 0, tau = 0.1: ln(1 + e^{-10})
    {
        PrototypeBank bank(2, 2, 0, 0.9);
        bank.restore(Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0}), nullptr, {true, true}, 0.9);
        auto x = Tensor::from_data({1, 2}, {2.0, 0.0});  // sim 1 to proto 0, 0 to proto 1
        ContrastiveConfig cfg;
        cfg.alpha = 1.0;
        cfg.beta = 0.0;
        cfg.tau = 0.1;
        auto loss = prototype_loss(bank, x, nullptr, {0}, cfg);
        const double expected = std::log(1.0 + std::exp(-10.0));
        checks.push_back(make_check("contrastive.closed_form_tau",
                                    std::fabs(loss->item() - expected), 1e-9));
    }

    // EMA convergence bound
    {
        PrototypeBank bank(1, 3, 0, 0.9);
        auto start = Tensor::from_data({1, 3}, {5.0, -2.0, 1.0});
        bank.restore(start, nullptr, {true}, 0.9);
        const std::vector<double> target{1.0, 1.0, 1.0};
        double initial = 0.0;
        for (std::size_t d = 0; d < 3; ++d) {
            initial += (start->data[d] - target[d]) * (start->data[d] - target[d]);
        }
        initial = std::sqrt(initial);
        auto batch = Tensor::from_data({1, 3}, target);
        for (int i = 0; i < 100; ++i) bank.update(batch, nullptr, {0}, {true});
        double sq = 0.0;
        auto p = bank.feat_proto(0);
        for (std::size_t d = 0; d < 3; ++d) sq += (p[d] - target[d]) * (p[d] - target[d]);
        const double residual = std::sqrt(sq);
        const double bound = std::pow(0.9, 100) * initial + 1e-12;
        checks.push_back(make_check("contrastive.ema_convergence",
                                    residual, bound,
                                    "residual " + std::to_string(residual)));
    }

    // scale invariance of the loss in its inputs
    {
        Rng rng(404);
        PrototypeBank bank(3, 5, 6, 0.9);
        bank.restore(random_signed_tensor({3, 5}, rng, 0.3, 1.0),
                     random_tensor({3, 6}, rng, 0.1, 1.0), {true, true, true}, 0.9);
        ContrastiveConfig cfg;
        double err = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            auto feats = random_signed_tensor({4, 5}, rng, 0.2, 1.0);
            auto atts = random_tensor({4, 6}, rng, 0.1, 1.0);
            const std::vector<std::size_t> labels{0, 1, 2, 1};
            auto base = prototype_loss(bank, feats, atts, labels, cfg);
            const double scale = rng.uniform(0.5, 8.0);
            auto feats2 = mul_scalar(feats, scale);
            auto atts2 = mul_scalar(atts, scale);
            auto rescaled = prototype_loss(bank, feats2, atts2, labels, cfg);
            err = std::max(err, std::fabs(base->item() - rescaled->item()));
            if (base->item() < 0.0) err = std::max(err, 1.0);  // loss must be nonnegative
        }
        checks.push_back(make_check("contrastive.scale_invariance", err, 1e-10));
    }

    // alpha/beta convex combination when both terms are equal
    {
        PrototypeBank bank(2, 2, 2, 0.9);
        bank.restore(Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0}),
                     Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0}), {true, true}, 0.9);
        auto x = Tensor::from_data({1, 2}, {1.0, 1.0});
        auto a = Tensor::from_data({1, 2}, {1.0, 1.0});
        ContrastiveConfig cfg;  // alpha 0.9, beta 0.1
        auto loss = prototype_loss(bank, x, a, {0}, cfg);
        checks.push_back(make_check("contrastive.convex_combination",
                                    std::fabs(loss->item() - std::log(2.0)), 1e-9));
    }

    return checks;
}

std::vector<PropertyCheck> verify_suite(const std::string& name) {
    if (name == "wavelet") return verify_wavelet();
    if (name == "grad") return verify_grad();
    if (name == "attention") return verify_attention();
    if (name == "contrastive") return verify_contrastive();
    if (name == "all") {
        std::vector<PropertyCheck> all;
        for (const char* suite : {"wavelet", "grad", "attention", "contrastive"}) {
            auto part = verify_suite(suite);
            all.insert(all.end(), part.begin(), part.end());
        }
        return all;
    }
    throw std::invalid_argument("unknown verify suite \"" + name +
                                "\" (wavelet, grad, attention, contrastive, all)");
}

bool all_passed(const std::vector<PropertyCheck>& checks) {
    for (const auto& c : checks) {
        if (!c.passed) return false;
    }
    return true;
}

}  // namespace wdce
