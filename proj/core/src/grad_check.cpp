#include "wdce/grad_check.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wdce {

double grad_check(const std::function<TensorPtr()>& f, const std::vector<TensorPtr>& inputs,
                  double step) {
    if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
    for (const auto& t : inputs) {
        if (!t) throw std::invalid_argument("grad_check: null input tensor");
        if (!t->requires_grad) {
            throw std::invalid_argument("grad_check: every checked input must require gradients");
        }
        t->zero_grad();
    }

    std::vector<std::vector<double>> analytic;
    {
        Graph graph;
        auto scope = graph.activate();
        TensorPtr loss = f();
        graph.backward(loss);
        for (const auto& t : inputs) {
            t->ensure_grad();
            analytic.push_back(t->grad);
        }
    }

    double worst = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        const TensorPtr& t = inputs[ti];
        for (std::size_t c = 0; c < t->size(); ++c) {
            const double saved = t->data[c];

            t->data[c] = saved + step;
            const double f_plus = f()->item();
            t->data[c] = saved - step;
            const double f_minus = f()->item();
            t->data[c] = saved;

            if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                throw std::runtime_error("grad_check: non-finite probe value at input " +
                                         std::to_string(ti) + " coordinate " + std::to_string(c));
            }

            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double a = analytic[ti][c];
            const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace wdce
