#pragma once

#include <optional>

#include "enzkit/align.hpp"
#include "enzkit/backbone.hpp"
#include "enzkit/config.hpp"
#include "enzkit/cross_attention.hpp"
#include "enzkit/dataset.hpp"
#include "enzkit/moe.hpp"
#include "enzkit/objective.hpp"

namespace enzkit {

/**
 * The full regression model. Which parameter groups exist depends on the
 * fusion mode and ablation switches; the registry order is canonical for
 * checkpoints and fixed-order gradient accumulation.
 *
 * staged:          enzyme -> cross-attention(substrate) -> expert mixture
 *                  (geometry-routed) -> pooled state -> head
 * geometry_first:  enzyme -> expert mixture on raw tokens -> cross-attention
 *                  (substrate) -> pooled state -> head
 * concat_mlp:      pooled enzyme + substrate + geometry means -> fusion MLP
 *                  -> head (no stages, no gates)
 */
struct Model {
    TrainConfig cfg;
    ParamRegistry reg;

    BackboneParams backbone;
    TensorPtr substrate_table;
    GeometryParams geometry;
    CrossAttentionParams xattn;  // registered when the recognition stage is on
    MoeParams moe;               // experts/gate when routing is on; aggregator in staged modes
    TensorPtr fuse_w1, fuse_b1, fuse_w2, fuse_b2;  // concat_mlp only
    HeadParams head;

    static Model build(const TrainConfig& cfg);
    Model clone_for_worker() const;
    void copy_trainable_from(const Model& source);

    bool has_stages() const { return cfg.fusion_mode != FusionMode::concat_mlp; }
    bool has_gates() const { return has_stages() && cfg.use_gmoe; }
};

// Per-sample forward products consumed by the batch losses. Stage summaries
// and gates are null in configurations that do not produce them.
struct SampleForward {
    TensorPtr mu;
    TensorPtr log_var;
    TensorPtr alpha_tilde;
    std::vector<int> selected;
    TensorPtr z0, z1, z2;
    TensorPtr attention;  // recognition map when the stage is active
};

SampleForward model_forward(Tape& tape, const Model& model, const SampleRecord& sample,
                            const DropoutCtx& dropout);

// Loss-relevant handles; either the live forward handles (single-tape path)
// or value copies re-registered as leaves on a batch tape (worker path).
struct SampleHandles {
    TensorPtr mu;
    TensorPtr log_var;
    TensorPtr alpha_tilde;
    std::vector<int> selected;
    TensorPtr z0, z1, z2;
    double target_z = 0.0;
};

SampleHandles handles_of(const SampleForward& fwd, double target_z);
// Deep value copies with requires_grad set; grads land on the copies.
SampleHandles leaf_copies_of(const SampleForward& fwd, double target_z);

struct BatchLoss {
    TensorPtr total;
    TensorPtr task;               // mean over the batch
    TensorPtr balance;            // null when gating is off
    TensorPtr align;              // null when alignment is off or batch < 2
    bool align_skipped = false;   // true when requested but batch < 2
};

/**
 * task mean + lambda1 * balance + lambda2 * align over one mini-batch.
 * Identical arithmetic regardless of whether the handles are live or leaf
 * copies. `frozen_bandwidths` pins the per-term kernel widths (used to hold
 * sigma constant during gradient checking).
 */
BatchLoss compose_batch_loss(
    Tape& tape, const Model& model, const std::vector<SampleHandles>& handles,
    const std::optional<std::pair<double, double>>& frozen_bandwidths = std::nullopt);

}  // namespace enzkit
