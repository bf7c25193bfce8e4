#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enzkit/grad_check.hpp"
#include "enzkit/metrics.hpp"
#include "enzkit/model.hpp"

namespace enzkit {

/**
 * Adam with decoupled weight decay. Decay applies only to trainable matrices
 * (both extents > 1); vectors — biases, gains, gate offsets — are exempt.
 * Moments are kept in double precision in registry order.
 */
class AdamW {
public:
    AdamW(const ParamRegistry& reg, double lr, double weight_decay);
    void step(const ParamRegistry& reg);  // consumes grads, then caller zeroes

    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

private:
    double lr_;
    double weight_decay_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

bool wants_weight_decay(const ParamRegistry::Entry& entry);

struct EpochLog {
    double mean_task = 0.0;
    double mean_balance = 0.0;
    double mean_align = 0.0;
    double mean_total = 0.0;
    std::vector<std::int64_t> expert_usage;  // selections per expert
    int batches = 0;
};

struct TrainResult {
    Model model;
    std::vector<EpochLog> log;
};

/**
 * Deterministic mini-batch training. Per epoch: a seed-keyed shuffle, then per
 * batch a two-phase pass — worker threads run per-sample forwards on private
 * parameter copies, the coupled batch losses run on a small tape over value
 * leaves, and workers backpropagate each sample with the leaf adjoints into
 * per-sample gradient buffers that are reduced in ascending sample order.
 * Results are bitwise identical for any worker count. A non-finite value
 * anywhere aborts with a diagnostic naming the batch and its sample ids.
 */
TrainResult train(const TrainConfig& cfg, const std::vector<SampleRecord>& data);

// Single-tape composite loss over a sample set (no workers); the arithmetic
// matches the training path bit for bit. Used by the gradient-check harness.
BatchLoss composite_loss(
    Tape& tape, const Model& model, const std::vector<const SampleRecord*>& samples,
    const std::optional<std::pair<double, double>>& frozen_bandwidths = std::nullopt);

struct ModuleGradReport {
    std::string module;
    GradCheckReport worst;
};

// Full-model gradient check on a composite-loss closure with the alignment
// bandwidth frozen at its unperturbed value; one worst-case report per
// parameter group.
std::vector<ModuleGradReport> gradcheck_model(const TrainConfig& cfg,
                                              const std::vector<SampleRecord>& samples,
                                              double h = 1e-5);

}  // namespace enzkit
