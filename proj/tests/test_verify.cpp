#include <doctest.h>

#include <stdexcept>

#include "wdce/verify.hpp"

using namespace wdce;

TEST_SUITE_BEGIN("verify");

TEST_CASE("every property suite passes end to end") {
    for (const char* suite : {"wavelet", "grad", "attention", "contrastive"}) {
        CAPTURE(suite);
        auto checks = verify_suite(suite);
        CHECK(checks.size() > 0);
        for (const auto& c : checks) {
            CAPTURE(c.name);
            CAPTURE(c.max_error);
            CHECK(c.passed);
        }
    }
}

TEST_CASE("unknown suites are rejected; all concatenates") {
    CHECK_THROWS_AS(verify_suite("nope"), std::invalid_argument);
    auto all = verify_suite("all");
    auto wavelet = verify_suite("wavelet");
    CHECK(all.size() > wavelet.size());
    CHECK(all_passed(all));
}

TEST_SUITE_END();
