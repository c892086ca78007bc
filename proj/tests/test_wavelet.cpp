#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "wdce/ops.hpp"
#include "wdce/rng.hpp"
#include "wdce/wavelet.hpp"

using namespace wdce;

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

double max_abs_diff(const TensorPtr& a, const TensorPtr& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a->size(); ++i) {
        worst = std::max(worst, std::fabs(a->data[i] - b->data[i]));
    }
    return worst;
}
}  // namespace

TEST_SUITE_BEGIN("wavelet");

TEST_CASE("smallest filter pair matches the definition") {
    auto f = build_haar(2);
    CHECK(f.low->shape == Shape{2, 1});
    CHECK(f.low->data[0] == doctest::Approx(kInvSqrt2));
    CHECK(f.low->data[1] == doctest::Approx(kInvSqrt2));
    CHECK(f.high->data[0] == doctest::Approx(kInvSqrt2));
    CHECK(f.high->data[1] == doctest::Approx(-kInvSqrt2));
}

TEST_CASE("filters are orthonormal and complete") {
    auto f = build_haar(4);
    auto ltl = matmul(transpose2d(f.low), f.low);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(ltl->data[i * 2 + j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-15));
        }
    }
    auto f64 = build_haar(64);
    auto complete = add(matmul(f64.low, transpose2d(f64.low)),
                        matmul(f64.high, transpose2d(f64.high)));
    double err = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
        for (std::size_t j = 0; j < 64; ++j) {
            err = std::max(err, std::fabs(complete->data[i * 64 + j] - (i == j ? 1.0 : 0.0)));
        }
    }
    CHECK(err < 1e-12);
}

TEST_CASE("odd or zero frame counts are rejected") {
    CHECK_THROWS_WITH_AS(build_haar(5), doctest::Contains("even"), std::invalid_argument);
    CHECK_THROWS_AS(build_haar(0), std::invalid_argument);
}

TEST_CASE("constant rows land in the low band only") {
    auto f = build_haar(4);
    auto bands = dwt(Tensor::from_data({1, 4}, {0.8, 0.8, 0.8, 0.8}), f);
    CHECK(bands.low->data[0] == doctest::Approx(0.8 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(bands.low->data[1] == doctest::Approx(0.8 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(bands.high->data[0] == doctest::Approx(0.0));
    CHECK(bands.high->data[1] == doctest::Approx(0.0));
}

TEST_CASE("hand-computed split of [1,3,2,4]") {
    auto f = build_haar(4);
    auto bands = dwt(Tensor::from_data({1, 4}, {1, 3, 2, 4}), f);
    CHECK(bands.low->data[0] == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(bands.low->data[1] == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(bands.high->data[0] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
    CHECK(bands.high->data[1] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("inverse of the constant split") {
    auto f = build_haar(4);
    auto x = idwt(Tensor::from_data({1, 2}, {std::sqrt(2.0), std::sqrt(2.0)}),
                  Tensor::from_data({1, 2}, {0.0, 0.0}), f);
    for (double v : x->data) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("perfect reconstruction across the frame sweep") {
    Rng rng(77);
    for (std::size_t frames : {2, 4, 8, 16, 32, 64}) {
        auto f = build_haar(frames);
        auto x = Tensor::uniform({3, 5, frames}, 2.0, rng);
        auto bands = dwt(x, f);
        CHECK(bands.low->shape == Shape{3, 5, frames / 2});
        auto back = idwt(bands.low, bands.high, f);
        CHECK(max_abs_diff(x, back) < 1e-12);
    }
}

TEST_CASE("zero bands reconstruct the zero signal") {
    auto f = build_haar(8);
    auto x = idwt(Tensor::zeros({2, 4}), Tensor::zeros({2, 4}), f);
    for (double v : x->data) CHECK(v == 0.0);
}

TEST_CASE("parseval energy balance") {
    Rng rng(78);
    for (int trial = 0; trial < 20; ++trial) {
        auto f = build_haar(16);
        auto x = Tensor::uniform({4, 16}, 3.0, rng);
        auto bands = dwt(x, f);
        double ex = 0.0, eb = 0.0;
        for (double v : x->data) ex += v * v;
        for (double v : bands.low->data) eb += v * v;
        for (double v : bands.high->data) eb += v * v;
        CHECK(std::fabs(ex - eb) / std::max(1.0, ex) < 1e-10);
    }
}

TEST_CASE("alternating signals land in the high band only") {
    auto f = build_haar(8);
    std::vector<double> alt(8);
    for (std::size_t t = 0; t < 8; ++t) alt[t] = (t % 2 == 0) ? 1.7 : -1.7;
    auto bands = dwt(Tensor::from_data({1, 8}, alt), f);
    for (double v : bands.low->data) CHECK(std::fabs(v) < 1e-15);
    for (double v : bands.high->data) CHECK(v == doctest::Approx(1.7 * std::sqrt(2.0)));
}

TEST_CASE("dwt backward is idwt of the output gradients") {
    Rng rng(79);
    auto f = build_haar(8);
    auto x = Tensor::uniform({3, 8}, 1.0, rng, true);
    auto gl = Tensor::uniform({3, 4}, 1.0, rng);
    auto gh = Tensor::uniform({3, 4}, 1.0, rng);
    Graph g;
    {
        auto scope = g.activate();
        auto bands = dwt(x, f);
        auto loss = add(sum(mul(bands.low, gl), {}), sum(mul(bands.high, gh), {}));
        g.backward(loss);
    }
    auto expected = idwt(gl, gh, f);
    for (std::size_t i = 0; i < x->size(); ++i) {
        CHECK(x->grad[i] == doctest::Approx(expected->data[i]).epsilon(1e-12));
    }
}

TEST_CASE("extent mismatches are rejected") {
    auto f = build_haar(8);
    CHECK_THROWS_AS(dwt(Tensor::zeros({2, 6}), f), std::invalid_argument);
    CHECK_THROWS_AS(idwt(Tensor::zeros({2, 3}), Tensor::zeros({2, 4}), f), std::invalid_argument);
    CHECK_THROWS_AS(idwt(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}), f), std::invalid_argument);
}

TEST_SUITE_END();
