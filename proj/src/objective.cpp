#include "enzkit/objective.hpp"

#include <cmath>

#include "enzkit/errors.hpp"

namespace enzkit {

HeadParams build_head(ParamRegistry& reg, int dim, std::uint64_t seed) {
    HeadParams h;
    h.dim = dim;
    const int hidden = dim / 2;
    h.w1 = reg.add_xavier("head.w1", dim, hidden, seed);
    h.b1 = reg.add_zeros("head.b1", 1, hidden);
    h.w2 = reg.add_xavier("head.w2", hidden, 2, seed);
    h.b2 = reg.add_zeros("head.b2", 1, 2);
    return h;
}

HeadOut head_forward(Tape& tape, const TensorPtr& state, const HeadParams& params) {
    if (state->rows != 1 || state->cols != params.dim) {
        throw ShapeError("head_forward: expected 1x" + std::to_string(params.dim) + ", got " +
                         shape_str(*state));
    }
    auto hidden = tape.gelu(tape.add_rowvec(tape.matmul(state, params.w1), params.b1));
    auto out = tape.add_rowvec(tape.matmul(hidden, params.w2), params.b2);
    auto mu = tape.cell(out, 0, 0);
    auto log_var = tape.clamp(tape.cell(out, 0, 1), -kLogVarClamp, kLogVarClamp);
    return HeadOut{mu, log_var};
}

TensorPtr gaussian_nll(Tape& tape, double target_z, const TensorPtr& mu,
                       const TensorPtr& log_var) {
    auto residual = tape.sub(mu, scalar(target_z));
    auto precision = tape.exp(tape.scale(log_var, -1.0));
    auto quad = tape.scale(tape.mul(precision, tape.mul(residual, residual)), 0.5);
    return tape.add(quad, tape.scale(log_var, 0.5));
}

TensorPtr squared_loss(Tape& tape, double target_z, const TensorPtr& mu) {
    auto residual = tape.sub(mu, scalar(target_z));
    return tape.scale(tape.mul(residual, residual), 0.5);
}

TensorPtr total_loss(Tape& tape, const TensorPtr& task, const TensorPtr& balance,
                     const TensorPtr& align, const LossWeights& w) {
    TensorPtr loss = task;
    if (balance) loss = tape.add(loss, tape.scale(balance, w.balance));
    if (align) loss = tape.add(loss, tape.scale(align, w.align));
    return loss;
}

Prediction predict(double mu, double log_var) {
    if (!std::isfinite(mu) || !std::isfinite(log_var)) {
        throw NumericError("predict: non-finite head output");
    }
    Prediction p;
    p.y_hat = std::pow(10.0, mu);
    p.log10_sigma = std::exp(0.5 * log_var);
    return p;
}

}  // namespace enzkit
