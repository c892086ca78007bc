#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "wdce/contrastive.hpp"
#include "wdce/ops.hpp"
#include "wdce/rng.hpp"
#include "wdce/tensor.hpp"

using namespace wdce;

TEST_SUITE_BEGIN("contrastive");

TEST_CASE("cosine similarity basics") {
    const std::vector<double> a{1.0, 2.0, -1.0};
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-14));

    const std::vector<double> ex{1.0, 0.0}, ey{0.0, 3.0};
    CHECK(cosine_similarity(ex, ey) == doctest::Approx(0.0));

    const std::vector<double> diag{1.0, 1.0};
    CHECK(cosine_similarity(ex, diag) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(cosine_similarity(ex, zero), std::domain_error);
    const std::vector<double> three{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(cosine_similarity(ex, three), std::invalid_argument);
}

TEST_CASE("update ignores batches without correct samples") {
    PrototypeBank bank(2, 3, 0, 0.9);
    auto feats = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    bank.update(feats, nullptr, {0, 1}, {false, false});
    CHECK_FALSE(bank.initialized()[0]);
    CHECK_FALSE(bank.initialized()[1]);
}

TEST_CASE("first correct sample seeds the prototype") {
    PrototypeBank bank(2, 3, 0, 0.9);
    auto feats = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    bank.update(feats, nullptr, {1, 1}, {true, false});
    CHECK(bank.initialized()[1]);
    CHECK_FALSE(bank.initialized()[0]);
    auto p = bank.feat_proto(1);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(2.0));
    CHECK(p[2] == doctest::Approx(3.0));
}

TEST_CASE("initialized prototypes follow the EMA rule") {
    PrototypeBank bank(1, 2, 0, 0.9);
    bank.restore(Tensor::from_data({1, 2}, {1.0, 0.0}), nullptr, {true}, 0.9);
    auto batch = Tensor::from_data({1, 2}, {0.0, 1.0});
    bank.update(batch, nullptr, {0}, {true});
    auto p = bank.feat_proto(0);
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("misclassified samples never contribute") {
    PrototypeBank bank(2, 2, 0, 0.9);
    bank.restore(Tensor::from_data({2, 2}, {1, 0, 0, 1}), nullptr, {true, true}, 0.9);
    auto feats = Tensor::from_data({2, 2}, {100.0, 100.0, 7.0, 7.0});
    bank.update(feats, nullptr, {0, 1}, {false, true});
    CHECK(bank.feat_proto(0)[0] == doctest::Approx(1.0));  // untouched
    CHECK(bank.feat_proto(1)[0] == doctest::Approx(0.7));  // 0.9*0 + 0.1*7
}

TEST_CASE("labels outside the bank are rejected") {
    PrototypeBank bank(2, 2, 0, 0.9);
    auto feats = Tensor::from_data({1, 2}, {1.0, 2.0});
    CHECK_THROWS_AS(bank.update(feats, nullptr, {2}, {true}), std::invalid_argument);
    ContrastiveConfig cfg;
    CHECK_THROWS_AS(prototype_loss(bank, feats, nullptr, {5}, cfg), std::invalid_argument);
}

TEST_CASE("equidistant sample pays ln 2") {
    PrototypeBank bank(2, 2, 0, 0.9);
    bank.restore(Tensor::from_data({2, 2}, {1, 0, 0, 1}), nullptr, {true, true}, 0.9);
    ContrastiveConfig cfg;
    cfg.alpha = 1.0;
    cfg.beta = 0.0;
    auto x = Tensor::from_data({1, 2}, {2.5, 2.5});
    auto loss = prototype_loss(bank, x, nullptr, {0}, cfg);
    CHECK(std::fabs(loss->item() - std::log(2.0)) < 1e-9);
}

TEST_CASE("separated prototypes at low temperature give the closed form") {
    PrototypeBank bank(2, 2, 0, 0.9);
    bank.restore(Tensor::from_data({2, 2}, {1, 0, 0, 1}), nullptr, {true, true}, 0.9);
    ContrastiveConfig cfg;
    cfg.alpha = 1.0;
    cfg.beta = 0.0;
    cfg.tau = 0.1;
    auto x = Tensor::from_data({1, 2}, {3.0, 0.0});
    auto loss = prototype_loss(bank, x, nullptr, {0}, cfg);
    CHECK(std::fabs(loss->item() - std::log(1.0 + std::exp(-10.0))) < 1e-9);
}

TEST_CASE("weights form a convex combination of the two terms") {
    PrototypeBank bank(2, 2, 2, 0.9);
    bank.restore(Tensor::from_data({2, 2}, {1, 0, 0, 1}),
                 Tensor::from_data({2, 2}, {1, 0, 0, 1}), {true, true}, 0.9);
    ContrastiveConfig cfg;  // alpha 0.9, beta 0.1: both terms ln 2 here
    auto x = Tensor::from_data({1, 2}, {1.0, 1.0});
    auto loss = prototype_loss(bank, x, Tensor::from_data({1, 2}, {1.0, 1.0}), {0}, cfg);
    CHECK(std::fabs(loss->item() - std::log(2.0)) < 1e-9);
}

TEST_CASE("uninitialized banks contribute zero unless strict") {
    PrototypeBank bank(2, 2, 0, 0.9);
    ContrastiveConfig cfg;
    auto x = Tensor::from_data({1, 2}, {1.0, 1.0});
    auto loss = prototype_loss(bank, x, nullptr, {0}, cfg);
    CHECK(loss->item() == 0.0);
    CHECK_THROWS_AS(prototype_loss(bank, x, nullptr, {0}, cfg, true), std::runtime_error);
}

TEST_CASE("config validation") {
    ContrastiveConfig bad;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.tau = 0.1;
    bad.alpha = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(PrototypeBank(2, 3, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(PrototypeBank(0, 3, 0, 0.9), std::invalid_argument);
}

TEST_CASE("loss is nonnegative and scale invariant") {
    Rng rng(11);
    PrototypeBank bank(3, 4, 0, 0.9);
    std::vector<double> protos(12);
    for (double& v : protos) v = rng.uniform(0.2, 1.0);
    bank.restore(Tensor::from_data({3, 4}, protos), nullptr, {true, true, true}, 0.9);
    ContrastiveConfig cfg;
    cfg.beta = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> vals(8);
        for (double& v : vals) v = rng.uniform(0.1, 1.0);
        auto x = Tensor::from_data({2, 4}, vals);
        const std::vector<std::size_t> labels{0, 2};
        auto base = prototype_loss(bank, x, nullptr, labels, cfg);
        CHECK(base->item() >= 0.0);
        auto scaled = prototype_loss(bank, mul_scalar(x, rng.uniform(0.5, 9.0)), nullptr, labels, cfg);
        CHECK(std::fabs(base->item() - scaled->item()) < 1e-10);
    }
}

TEST_CASE("bank files round trip through the dump container") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "wdce_test_bank";
    fs::create_directories(dir);
    const std::string path = (dir / "bank.wdcb").string();

    Rng rng(13);
    PrototypeBank bank(3, 4, 6, 0.85);
    std::vector<double> feat(12), att(18);
    for (double& v : feat) v = rng.uniform(-1.0, 1.0);
    for (double& v : att) v = rng.uniform(0.0, 1.0);
    bank.restore(Tensor::from_data({3, 4}, feat), Tensor::from_data({3, 6}, att),
                 {true, false, true}, 0.85);

    save_bank(path, bank);
    PrototypeBank loaded = load_bank(path);
    CHECK(loaded.classes() == 3);
    CHECK(loaded.feat_dim() == 4);
    CHECK(loaded.att_dim() == 6);
    CHECK(loaded.momentum() == doctest::Approx(0.85));
    CHECK(loaded.initialized() == std::vector<bool>{true, false, true});
    for (std::size_t k = 0; k < 3; ++k) {
        auto a = bank.feat_proto(k);
        auto b = loaded.feat_proto(k);
        for (std::size_t d = 0; d < 4; ++d) CHECK(a[d] == b[d]);  // bitwise
        auto c = bank.att_proto(k);
        auto e = loaded.att_proto(k);
        for (std::size_t d = 0; d < 6; ++d) CHECK(c[d] == e[d]);
    }
    fs::remove_all(dir);
}

TEST_CASE("hundred EMA updates converge geometrically") {
    PrototypeBank bank(1, 2, 0, 0.9);
    auto start = Tensor::from_data({1, 2}, {10.0, -10.0});
    bank.restore(start, nullptr, {true}, 0.9);
    const std::vector<double> target{0.5, 0.5};
    double initial = std::hypot(10.0 - 0.5, -10.0 - 0.5);
    auto batch = Tensor::from_data({1, 2}, target);
    for (int i = 0; i < 100; ++i) bank.update(batch, nullptr, {0}, {true});
    auto p = bank.feat_proto(0);
    const double residual = std::hypot(p[0] - 0.5, p[1] - 0.5);
    CHECK(residual < std::pow(0.9, 100) * initial + 1e-12);
}

TEST_SUITE_END();
