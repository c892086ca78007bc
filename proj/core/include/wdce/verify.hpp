#pragma once

#include <string>
#include <vector>

namespace wdce {

struct PropertyCheck {
    std::string name;
    bool passed = false;
    double max_error = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

/// Filter algebra, perfect reconstruction, Parseval, linearity and the
/// band-assignment edge cases, over T in {2, 4, ..., 64}.
std::vector<PropertyCheck> verify_wavelet();

/// Central finite differences against every op's backward (10 seeds per
/// op), every layer in isolation, and the full composite loss at a
/// micro configuration.
std::vector<PropertyCheck> verify_grad();

/// Attention map normalization, gate ranges, degenerate zero-parameter
/// values and argmax invariance under positive input scaling.
std::vector<PropertyCheck> verify_attention();

/// Closed-form loss values, EMA convergence and cosine scale invariance.
std::vector<PropertyCheck> verify_contrastive();

/// Dispatch by suite name; "all" concatenates every suite.
std::vector<PropertyCheck> verify_suite(const std::string& name);

bool all_passed(const std::vector<PropertyCheck>& checks);

}  // namespace wdce
