#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "wdce/attention.hpp"
#include "wdce/ops.hpp"
#include "wdce/rng.hpp"
#include "wdce/wavelet.hpp"

using namespace wdce;

TEST_SUITE_BEGIN("attention");

namespace {

DecouplingAttentionParams zero_da(std::size_t channels, std::size_t frames) {
    DecouplingAttentionParams p;
    p.kernel = 3;
    p.linear_w = Tensor::zeros({frames, frames / 2}, true);
    p.linear_b = Tensor::zeros({frames / 2}, true);
    p.conv_w = Tensor::zeros({2, channels, 3}, true);
    p.conv_b = Tensor::zeros({2}, true);
    return p;
}

TrajectoryAttentionParams zero_ta(std::size_t channels, std::size_t joints, std::size_t d) {
    TrajectoryAttentionParams p;
    p.mlp_a_w = Tensor::zeros({joints, d}, true);
    p.mlp_a_b = Tensor::zeros({d}, true);
    p.mlp_b_w = Tensor::zeros({channels, d}, true);
    p.mlp_b_b = Tensor::zeros({d}, true);
    return p;
}

}  // namespace

TEST_CASE("decoupling attention output shapes") {
    Rng rng(1);
    const std::size_t n = 2, c = 3, t = 8, v = 5;
    auto params = DecouplingAttentionParams::init(c, t, 3, rng);
    auto x = Tensor::uniform({n, c, t, v}, 1.0, rng);
    auto bands = dwt(feature_to_trajectory_layout(x), build_haar(t));
    auto d = decoupling_attention(x, bands.low, bands.high, params);
    CHECK(d.salient->shape == Shape{n, c, t / 2, v});
    CHECK(d.subtle->shape == Shape{n, c, t / 2, v});
    CHECK(d.weight_low->shape == Shape{n, 1, t / 2});
    CHECK(d.weight_high->shape == Shape{n, 1, t / 2});
}

TEST_CASE("zero decoupling parameters halve both bands") {
    Rng rng(2);
    const std::size_t c = 4, t = 8, v = 5;
    auto params = zero_da(c, t);
    auto x = Tensor::uniform({2, c, t, v}, 1.5, rng);
    auto bands = dwt(feature_to_trajectory_layout(x), build_haar(t));
    auto d = decoupling_attention(x, bands.low, bands.high, params);
    for (double w : d.weight_low->data) CHECK(w == doctest::Approx(0.5));
    for (double w : d.weight_high->data) CHECK(w == doctest::Approx(0.5));
    auto low_feat = band_to_feature_layout(bands.low, c, v);
    for (std::size_t i = 0; i < d.salient->size(); ++i) {
        CHECK(d.salient->data[i] == doctest::Approx(0.5 * low_feat->data[i]).epsilon(1e-14));
    }
}

TEST_CASE("gates stay strictly inside (0, 1)") {
    Rng rng(3);
    auto params = DecouplingAttentionParams::init(6, 8, 3, rng);
    auto x = Tensor::uniform({3, 6, 8, 4}, 2.0, rng);
    auto bands = dwt(feature_to_trajectory_layout(x), build_haar(8));
    auto d = decoupling_attention(x, bands.low, bands.high, params);
    for (double w : d.weight_low->data) {
        CHECK(w > 0.0);
        CHECK(w < 1.0);
    }
    for (double w : d.weight_high->data) {
        CHECK(w > 0.0);
        CHECK(w < 1.0);
    }
}

TEST_CASE("zero trajectory MLPs give uniform attention over joints") {
    Rng rng(4);
    const std::size_t n = 2, c = 3, t = 4, v = 5;
    auto params = zero_ta(c, v, 4);
    auto x = Tensor::uniform({n, c, t, v}, 1.0, rng);
    auto res = trajectory_attention(x, params);
    for (double p : res.att.values->data) CHECK(p == doctest::Approx(1.0 / v).epsilon(1e-14));
    for (std::size_t i = 0; i < x->size(); ++i) {
        CHECK(res.enhanced->data[i] == doctest::Approx(x->data[i] / double(v)).epsilon(1e-14));
    }
    CHECK(res.att.max_row_sum_error() < 1e-10);
}

TEST_CASE("zero subtle input leaves uniform attention and zero output") {
    auto params = zero_ta(3, 5, 4);
    auto x = Tensor::zeros({2, 3, 4, 5});
    auto res = trajectory_attention(x, params);
    for (double p : res.att.values->data) CHECK(p == doctest::Approx(1.0 / 5.0));
    for (double vv : res.enhanced->data) CHECK(vv == 0.0);
}

TEST_CASE("attention rows normalize after every forward") {
    Rng rng(5);
    auto params = TrajectoryAttentionParams::init(6, 7, 8, rng);
    for (int trial = 0; trial < 5; ++trial) {
        auto x = Tensor::uniform({2, 6, 4, 7}, 2.0, rng);
        auto res = trajectory_attention(x, params);
        CHECK(res.att.max_row_sum_error() < 1e-10);
        for (double p : res.att.values->data) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
}

TEST_CASE("parameter size mismatches are rejected") {
    Rng rng(6);
    auto params = TrajectoryAttentionParams::init(3, 5, 4, rng);
    auto wrong_joints = Tensor::zeros({2, 3, 4, 6});
    CHECK_THROWS_AS(trajectory_attention(wrong_joints, params), std::invalid_argument);
    auto wrong_channels = Tensor::zeros({2, 4, 4, 5});
    CHECK_THROWS_AS(trajectory_attention(wrong_channels, params), std::invalid_argument);

    auto mismatched = params;
    mismatched.mlp_b_w = Tensor::zeros({3, 9}, true);  // width differs from branch A
    auto x = Tensor::zeros({2, 3, 4, 5});
    CHECK_THROWS_AS(trajectory_attention(x, mismatched), std::invalid_argument);
}

TEST_CASE("positive rescaling preserves per-row argmax with zero biases") {
    Rng rng(7);
    auto params = TrajectoryAttentionParams::init(4, 5, 3, rng);
    params.mlp_a_b = Tensor::zeros({3}, true);
    params.mlp_b_b = Tensor::zeros({3}, true);
    auto x = Tensor::uniform({2, 4, 6, 5}, 1.0, rng);
    for (double& v : x->data) v += (v >= 0 ? 0.1 : -0.1);
    auto base = trajectory_attention(x, params).att.values;
    auto scaled = trajectory_attention(mul_scalar(x, 3.7), params).att.values;
    for (std::size_t row = 0; row < 2 * 4; ++row) {
        std::size_t best_a = 0, best_b = 0;
        for (std::size_t j = 1; j < 5; ++j) {
            if (base->data[row * 5 + j] > base->data[row * 5 + best_a]) best_a = j;
            if (scaled->data[row * 5 + j] > scaled->data[row * 5 + best_b]) best_b = j;
        }
        CHECK(best_a == best_b);
    }
}

TEST_CASE("odd decoupling kernel is required") {
    Rng rng(8);
    CHECK_THROWS_AS(DecouplingAttentionParams::init(4, 8, 4, rng), std::invalid_argument);
    CHECK_THROWS_AS(DecouplingAttentionParams::init(4, 7, 3, rng), std::invalid_argument);
}

TEST_SUITE_END();
