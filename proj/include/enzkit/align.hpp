#pragma once

#include <utility>
#include <vector>

#include "enzkit/tape.hpp"

namespace enzkit {

/**
 * Pooled per-stage summaries feeding the alignment loss: Z0/Z1 are token
 * means of the raw and substrate-conditioned representations, Z2 the
 * geometry-conditioned state (already a single vector).
 */
struct StageSummaries {
    TensorPtr z0;
    TensorPtr z1;
    TensorPtr z2;
};

StageSummaries stage_summaries(Tape& tape, const TensorPtr& h0, const TensorPtr& h1,
                               const TensorPtr& h2);

struct KernelConfig {
    enum class Mode { fixed, median };
    Mode mode = Mode::median;
    double sigma = 1.0;  // used when mode == fixed

    static KernelConfig median() { return KernelConfig{Mode::median, 1.0}; }
    static KernelConfig fixed(double s) { return KernelConfig{Mode::fixed, s}; }
};

// exp(-||a-b||^2 / (2 sigma^2)); in (0, 1], equal to 1 iff a == b.
TensorPtr rbf_kernel(Tape& tape, const TensorPtr& a, const TensorPtr& b, double sigma);
double rbf_kernel_value(const std::vector<double>& a, const std::vector<double>& b, double sigma);

// Median of pairwise Euclidean distances (exact zeros excluded; averages the
// middle two for even counts; falls back to 1 when every pair coincides).
// Precondition: at least two points.
double median_bandwidth(const std::vector<const Tensor*>& points);

/**
 * Diagonal-free, 1/N^2-normalized two-set squared-MMD estimate: within-set
 * sums skip the diagonal but keep 1/N^2 normalization while the cross sum is
 * complete, so the estimate may be negative (two identical sets give exactly
 * -2/N). The bandwidth is a constant with respect to gradients.
 */
TensorPtr mmd2(Tape& tape, const std::vector<TensorPtr>& set_a,
               const std::vector<TensorPtr>& set_b, double sigma);

/**
 * Alignment loss over a mini-batch: mmd2({Z1},{Z0}) + mmd2({Z2},{Z0}), each
 * term with its own bandwidth (median over the union of its two sets, or the
 * fixed override). Precondition: batch of at least 2.
 */
TensorPtr alignment_loss(Tape& tape, const std::vector<StageSummaries>& batch,
                         const KernelConfig& config);
// Same loss with both per-term bandwidths pinned by the caller.
TensorPtr alignment_loss(Tape& tape, const std::vector<StageSummaries>& batch, double sigma1,
                         double sigma2);

// Bandwidths the alignment loss would use for this batch (term 1, term 2);
// exposed so a frozen-bandwidth copy of the loss can be built for gradient
// checking.
std::pair<double, double> alignment_bandwidths(const std::vector<StageSummaries>& batch,
                                               const KernelConfig& config);

}  // namespace enzkit
