#pragma once

#include <functional>
#include <string>
#include <vector>

#include "enzkit/tape.hpp"

namespace enzkit {

struct GradCheckReport {
    std::string param;
    double max_rel_error = 0.0;
    int worst_row = 0;
    int worst_col = 0;
};

// Relative error convention shared by the checker and its tests.
inline double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

/**
 * Compares the reverse-mode gradient of `loss_fn` against central finite
 * differences (f(t+h) - f(t-h)) / 2h for every element of every tensor in
 * `params`. `loss_fn` must build its graph on the tape it is given, return a
 * 1x1 scalar, and be deterministic. One report per parameter tensor.
 */
std::vector<GradCheckReport> grad_check(const std::function<TensorPtr(Tape&)>& loss_fn,
                                        const std::vector<TensorPtr>& params, double h = 1e-5);

}  // namespace enzkit
