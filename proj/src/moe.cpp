#include "enzkit/moe.hpp"

#include <algorithm>
#include <numeric>

#include "enzkit/errors.hpp"

namespace enzkit {

PocketIndexSet::PocketIndexSet(std::vector<int> idx) : indices(std::move(idx)) {
    if (indices.empty()) throw PreconditionError("pocket index set must be non-empty");
    for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0) throw PreconditionError("pocket index must be non-negative");
        if (i > 0 && indices[i] <= indices[i - 1]) {
            throw PreconditionError("pocket indices must be strictly increasing");
        }
    }
}

void PocketIndexSet::check_bounds(int seq_len) const {
    if (indices.back() >= seq_len) {
        throw PreconditionError("pocket index " + std::to_string(indices.back()) +
                                " out of range for sequence length " + std::to_string(seq_len));
    }
}

MoeParams build_moe(ParamRegistry& reg, int dim, int n, int k, int rank, std::uint64_t seed) {
    MoeParams p;
    p.n = n;
    p.k = k;
    p.rank = rank;
    p.dim = dim;
    p.gate = reg.add_xavier("moe.gate", n, 2 * dim, seed);
    p.gate_bias = reg.add_zeros("moe.gate_bias", n, 1);
    for (int i = 0; i < n; ++i) {
        const std::string pre = "moe.e" + std::to_string(i) + ".";
        ExpertParams e;
        e.u = reg.add_xavier(pre + "u", rank, dim, seed);
        e.v = reg.add_xavier(pre + "v", dim, rank, seed);
        e.b = reg.add_xavier(pre + "b", rank, dim, seed);
        p.experts.push_back(std::move(e));
    }
    build_moe_aggregator(reg, p, dim, seed);
    return p;
}

void build_moe_aggregator(ParamRegistry& reg, MoeParams& moe, int dim, std::uint64_t seed) {
    moe.dim = dim;
    moe.agg_w1 = reg.add_xavier("moe.agg.w1", dim, dim, seed);
    moe.agg_b1 = reg.add_zeros("moe.agg.b1", 1, dim);
    moe.agg_w2 = reg.add_xavier("moe.agg.w2", dim, dim, seed);
    moe.agg_b2 = reg.add_zeros("moe.agg.b2", 1, dim);
}

namespace {

// Pooled geometry summary, zeroed under the geometry-blind ablation.
TensorPtr geometry_summary(Tape& tape, const TensorPtr& geom, int dim, const MoeOptions& opt) {
    if (opt.geometry_blind) return zeros(1, dim);
    return tape.mean_pool_rows(geom);
}

std::vector<int> top_k_indices(const TensorPtr& alpha, int k) {
    std::vector<int> order(alpha->cols);
    std::iota(order.begin(), order.end(), 0);
    // stable sort on descending value keeps the lower index first on ties
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return alpha->data[a] > alpha->data[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace

GateReport moe_route(Tape& tape, const TensorPtr& fused, const TensorPtr& geom,
                     const PocketIndexSet& pocket, const MoeParams& params,
                     const MoeOptions& opt) {
    pocket.check_bounds(fused->rows);
    auto pocket_summary = tape.mean_pool_rows(tape.gather_rows(fused, pocket.indices));
    auto geom_summary = geometry_summary(tape, geom, params.dim, opt);
    auto routing = tape.concat_cols(pocket_summary, geom_summary);  // 1 x 2D
    auto logits = tape.add(tape.matmul_nt(routing, params.gate), tape.transpose(params.gate_bias));
    auto alpha = tape.softmax_rows(logits);

    GateReport report;
    report.alpha = alpha;
    report.routing_vector = routing;
    report.selected = top_k_indices(alpha, params.k);
    // Renormalizing the kept mass to 1 equals a softmax over the selected
    // logits alone; computing it that way keeps unselected logits out of the
    // differentiable path entirely (their true gradient is zero).
    auto kept_logits = tape.gather_cols(logits, report.selected);
    auto renorm = tape.softmax_rows(kept_logits);
    report.alpha_tilde = tape.scatter_cols(renorm, report.selected, params.n);
    return report;
}

TensorPtr moe_expert_forward(Tape& tape, int expert, const TensorPtr& fused,
                             const TensorPtr& geom, const PocketIndexSet& pocket,
                             const MoeParams& params, const MoeOptions& opt) {
    if (expert < 0 || expert >= params.n) {
        throw PreconditionError("expert index " + std::to_string(expert) +
                                " out of range for n=" + std::to_string(params.n));
    }
    pocket.check_bounds(fused->rows);
    const ExpertParams& e = params.experts[expert];
    auto gamma = geometry_summary(tape, geom, params.dim, opt);      // 1 x D
    auto pocket_rows = tape.gather_rows(fused, pocket.indices);      // P x D
    auto modulation = tape.matmul_nt(gamma, e.b);                    // 1 x r
    auto pre = tape.add(tape.matmul_nt(pocket_rows, e.u),
                        tape.broadcast_rows(modulation, pocket.size()));
    auto delta = tape.matmul_nt(tape.gelu(pre), e.v);                // P x D
    return tape.row_update_add(fused, pocket.indices, delta);
}

TensorPtr moe_mix_experts(Tape& tape, const GateReport& report, const TensorPtr& fused,
                          const TensorPtr& geom, const PocketIndexSet& pocket,
                          const MoeParams& params, const MoeOptions& opt) {
    TensorPtr mixed;
    for (int idx : report.selected) {
        auto out = moe_expert_forward(tape, idx, fused, geom, pocket, params, opt);
        auto weighted = tape.scale_by(out, tape.cell(report.alpha_tilde, 0, idx));
        mixed = mixed ? tape.add(mixed, weighted) : weighted;
    }
    return mixed;
}

TensorPtr moe_aggregate(Tape& tape, const TensorPtr& tokens, const MoeParams& params) {
    auto pooled = tape.mean_pool_rows(tokens);
    auto hidden = tape.gelu(tape.add_rowvec(tape.matmul(pooled, params.agg_w1), params.agg_b1));
    return tape.add_rowvec(tape.matmul(hidden, params.agg_w2), params.agg_b2);
}

MoeForwardOut moe_forward(Tape& tape, const TensorPtr& fused, const TensorPtr& geom,
                          const PocketIndexSet& pocket, const MoeParams& params,
                          const MoeOptions& opt) {
    GateReport report = moe_route(tape, fused, geom, pocket, params, opt);
    auto mixed = moe_mix_experts(tape, report, fused, geom, pocket, params, opt);
    return MoeForwardOut{moe_aggregate(tape, mixed, params), report};
}

TensorPtr balance_loss(Tape& tape, const std::vector<GateReport>& reports, int n, int k) {
    if (reports.empty()) throw PreconditionError("balance_loss: empty batch");
    TensorPtr gate_sum;
    std::vector<double> usage(static_cast<size_t>(n), 0.0);
    for (const auto& r : reports) {
        gate_sum = gate_sum ? tape.add(gate_sum, r.alpha_tilde) : r.alpha_tilde;
        for (int idx : r.selected) usage[idx] += 1.0;
    }
    const double inv_b = 1.0 / static_cast<double>(reports.size());
    auto mean_gate = tape.scale(gate_sum, inv_b);
    auto gate_term = tape.sum_sq(tape.sub(mean_gate, full(1, n, 1.0 / n)));

    double usage_term = 0.0;
    const double target = static_cast<double>(k) / n;
    for (int i = 0; i < n; ++i) {
        const double d = usage[i] * inv_b - target;
        usage_term += d * d;
    }
    return tape.add(gate_term, scalar(usage_term));
}

}  // namespace enzkit
