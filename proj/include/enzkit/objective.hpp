#pragma once

#include "enzkit/params.hpp"
#include "enzkit/tape.hpp"

namespace enzkit {

/**
 * Prediction head: D -> D/2 -> 2 MLP with GELU; the two outputs are the
 * predicted log10 value and its log-variance. The log-variance is clamped to
 * [-10, 10] before the likelihood to keep exp(-s) bounded early in training.
 */
struct HeadParams {
    TensorPtr w1, b1;  // D x D/2, 1 x D/2
    TensorPtr w2, b2;  // D/2 x 2, 1 x 2
    int dim = 0;
};

inline constexpr double kLogVarClamp = 10.0;

HeadParams build_head(ParamRegistry& reg, int dim, std::uint64_t seed);

struct HeadOut {
    TensorPtr mu;       // 1 x 1
    TensorPtr log_var;  // 1 x 1, already clamped
};

HeadOut head_forward(Tape& tape, const TensorPtr& state, const HeadParams& params);

// 1/2 e^{-s} (z - mu)^2 + 1/2 s for the log10 target z.
TensorPtr gaussian_nll(Tape& tape, double target_z, const TensorPtr& mu, const TensorPtr& log_var);

// Plain squared-error alternative: 1/2 (z - mu)^2.
TensorPtr squared_loss(Tape& tape, double target_z, const TensorPtr& mu);

struct LossWeights {
    double balance = 0.01;  // lambda_1
    double align = 0.1;     // lambda_2
};

// task + lambda_1 * balance + lambda_2 * align
TensorPtr total_loss(Tape& tape, const TensorPtr& task, const TensorPtr& balance,
                     const TensorPtr& align, const LossWeights& w);

struct Prediction {
    double y_hat = 0.0;        // 10^mu, positive
    double log10_sigma = 0.0;  // exp(s/2), spread in log10 units
};

Prediction predict(double mu, double log_var);

}  // namespace enzkit
