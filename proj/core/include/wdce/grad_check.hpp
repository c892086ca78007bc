#pragma once

#include <functional>
#include <vector>

#include "wdce/tensor.hpp"

namespace wdce {

/// Compares analytic gradients of a scalar-valued function against central
/// finite differences at every coordinate of `inputs`. The function is
/// invoked once under a fresh graph for the analytic pass and twice per
/// coordinate (forward-only) for the numeric probes; it must rebuild its
/// computation from the current contents of `inputs` on every call.
///
/// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const std::function<TensorPtr()>& f, const std::vector<TensorPtr>& inputs,
                  double step = 1e-6);

}  // namespace wdce
