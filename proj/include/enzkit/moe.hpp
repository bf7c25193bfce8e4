#pragma once

#include <vector>

#include "enzkit/params.hpp"
#include "enzkit/tape.hpp"

namespace enzkit {

/**
 * Pocket index set: sorted, strictly increasing, non-empty token indices
 * designating the active site.
 */
struct PocketIndexSet {
    std::vector<int> indices;

    explicit PocketIndexSet(std::vector<int> idx);
    int size() const { return static_cast<int>(indices.size()); }
    void check_bounds(int seq_len) const;  // throws PreconditionError
};

struct ExpertParams {
    TensorPtr u;  // rank x D
    TensorPtr v;  // D x rank
    TensorPtr b;  // rank x D, geometry modulation
};

/**
 * Stage 2: routes each sample by pooled recognition + geometry evidence to
 * the k strongest of n pocket-specialized low-rank experts, renormalizes the
 * kept gate mass to 1 (ties broken toward the lower expert index), and
 * aggregates the expert mixture through a two-layer MLP.
 */
struct MoeParams {
    TensorPtr gate;       // n x 2D
    TensorPtr gate_bias;  // n x 1
    std::vector<ExpertParams> experts;
    TensorPtr agg_w1, agg_b1;  // D x D, 1 x D
    TensorPtr agg_w2, agg_b2;  // D x D, 1 x D
    int n = 0;
    int k = 0;
    int rank = 0;
    int dim = 0;
};

MoeParams build_moe(ParamRegistry& reg, int dim, int n, int k, int rank, std::uint64_t seed);
// Aggregation MLP registered alone for runs that skip expert routing.
void build_moe_aggregator(ParamRegistry& reg, MoeParams& moe, int dim, std::uint64_t seed);

struct GateReport {
    TensorPtr alpha;          // 1 x n, softmax probabilities
    TensorPtr alpha_tilde;    // 1 x n, exactly k non-zeros summing to 1
    std::vector<int> selected;  // ascending expert indices
    TensorPtr routing_vector;   // 1 x 2D
};

// Geometry-blind variant for the plain-mixture ablation: the geometry half of
// the routing vector and the per-expert geometry modulation are zeroed.
struct MoeOptions {
    bool geometry_blind = false;
};

GateReport moe_route(Tape& tape, const TensorPtr& fused, const TensorPtr& geom,
                     const PocketIndexSet& pocket, const MoeParams& params,
                     const MoeOptions& opt = {});

// One expert: pocket rows get h + V * gelu(U h + B * pooled_geometry);
// non-pocket rows are copied bitwise.
TensorPtr moe_expert_forward(Tape& tape, int expert, const TensorPtr& fused,
                             const TensorPtr& geom, const PocketIndexSet& pocket,
                             const MoeParams& params, const MoeOptions& opt = {});

// Gate-weighted sum of the selected experts' token matrices (no pooling).
TensorPtr moe_mix_experts(Tape& tape, const GateReport& report, const TensorPtr& fused,
                          const TensorPtr& geom, const PocketIndexSet& pocket,
                          const MoeParams& params, const MoeOptions& opt = {});

// Token-mean pool then the aggregation MLP -> 1 x D.
TensorPtr moe_aggregate(Tape& tape, const TensorPtr& tokens, const MoeParams& params);

struct MoeForwardOut {
    TensorPtr state;  // H2, 1 x D
    GateReport report;
};

MoeForwardOut moe_forward(Tape& tape, const TensorPtr& fused, const TensorPtr& geom,
                          const PocketIndexSet& pocket, const MoeParams& params,
                          const MoeOptions& opt = {});

// ||mean(alpha_tilde) - 1/n||^2 + ||mean(usage indicator) - k/n||^2 over the
// batch. The indicator term is piecewise constant and contributes value only.
TensorPtr balance_loss(Tape& tape, const std::vector<GateReport>& reports, int n, int k);

}  // namespace enzkit
