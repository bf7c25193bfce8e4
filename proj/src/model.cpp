#include "enzkit/model.hpp"

#include "enzkit/errors.hpp"

namespace enzkit {

Model Model::build(const TrainConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    const int dim = cfg.dim;
    m.backbone = build_backbone(m.reg, dim, cfg.backbone_layers, cfg.max_seq_len,
                                cfg.backbone_seed, cfg.lora_rank, cfg.lora_scale,
                                cfg.lora_dropout, cfg.seed);
    m.substrate_table = build_substrate_table(m.reg, dim, cfg.seed);
    m.geometry = build_geometry(m.reg, dim, cfg.seed);
    if (m.has_stages()) {
        if (cfg.use_mrca || cfg.fusion_mode == FusionMode::geometry_first) {
            m.xattn = build_cross_attention(m.reg, dim, cfg.attention_dim(), cfg.seed);
        }
        if (cfg.use_gmoe) {
            m.moe = build_moe(m.reg, dim, cfg.experts, cfg.top_k, cfg.expert_rank, cfg.seed);
        } else {
            build_moe_aggregator(m.reg, m.moe, dim, cfg.seed);
        }
    } else {
        m.fuse_w1 = m.reg.add_xavier("fuse.w1", 3 * dim, dim, cfg.seed);
        m.fuse_b1 = m.reg.add_zeros("fuse.b1", 1, dim);
        m.fuse_w2 = m.reg.add_xavier("fuse.w2", dim, dim, cfg.seed);
        m.fuse_b2 = m.reg.add_zeros("fuse.b2", 1, dim);
    }
    m.head = build_head(m.reg, dim, cfg.seed);
    return m;
}

Model Model::clone_for_worker() const {
    Model copy = build(cfg);
    copy.copy_trainable_from(*this);
    return copy;
}

void Model::copy_trainable_from(const Model& source) {
    const auto& src = source.reg.entries();
    const auto& dst = reg.entries();
    if (src.size() != dst.size()) {
        throw ConfigError("copy_trainable_from: registry layout mismatch");
    }
    for (size_t i = 0; i < src.size(); ++i) {
        if (src[i].name != dst[i].name) {
            throw ConfigError("copy_trainable_from: parameter order mismatch at " +
                              src[i].name);
        }
        if (!dst[i].frozen) dst[i].tensor->data = src[i].tensor->data;
    }
}

namespace {

GeometryInput geometry_input_of(const SampleRecord& sample) {
    GeometryInput g;
    g.coords = sample.coords;
    for (int idx : sample.pocket) g.residue_tokens.push_back(sample.enzyme_tokens[idx]);
    return g;
}

SampleForward forward_staged(Tape& tape, const Model& m, const SampleRecord& sample,
                             const DropoutCtx& dropout) {
    SampleForward out;
    auto h0 = encode_enzyme(tape, sample.enzyme_tokens, m.backbone, dropout);
    auto hm = encode_substrate(tape, sample.substrate_tokens, m.substrate_table);
    auto hg = encode_geometry(tape, geometry_input_of(sample), m.geometry);
    PocketIndexSet pocket = sample.pocket_set();
    pocket.check_bounds(h0->rows);

    TensorPtr h1 = h0;
    if (m.cfg.use_mrca) {
        auto x = cross_attention_forward(tape, h0, hm, m.xattn);
        h1 = x.fused;
        out.attention = x.attention;
    }
    TensorPtr h2;
    if (m.cfg.use_gmoe) {
        auto fwd = moe_forward(tape, h1, hg, pocket, m.moe, MoeOptions{!m.cfg.moe_geometry});
        h2 = fwd.state;
        out.alpha_tilde = fwd.report.alpha_tilde;
        out.selected = fwd.report.selected;
    } else {
        h2 = moe_aggregate(tape, h1, m.moe);
    }
    auto summaries = stage_summaries(tape, h0, h1, h2);
    out.z0 = summaries.z0;
    out.z1 = summaries.z1;
    out.z2 = summaries.z2;
    auto pred = head_forward(tape, h2, m.head);
    out.mu = pred.mu;
    out.log_var = pred.log_var;
    return out;
}

SampleForward forward_geometry_first(Tape& tape, const Model& m, const SampleRecord& sample,
                                     const DropoutCtx& dropout) {
    SampleForward out;
    auto h0 = encode_enzyme(tape, sample.enzyme_tokens, m.backbone, dropout);
    auto hm = encode_substrate(tape, sample.substrate_tokens, m.substrate_table);
    auto hg = encode_geometry(tape, geometry_input_of(sample), m.geometry);
    PocketIndexSet pocket = sample.pocket_set();
    pocket.check_bounds(h0->rows);

    // structural conditioning first: expert mixture on the raw tokens,
    // kept at token resolution for the later recognition stage
    TensorPtr h1 = h0;
    if (m.cfg.use_gmoe) {
        const MoeOptions opt{!m.cfg.moe_geometry};
        auto report = moe_route(tape, h0, hg, pocket, m.moe, opt);
        h1 = moe_mix_experts(tape, report, h0, hg, pocket, m.moe, opt);
        out.alpha_tilde = report.alpha_tilde;
        out.selected = report.selected;
    }
    TensorPtr fused = h1;
    if (m.cfg.use_mrca) {
        auto x = cross_attention_forward(tape, h1, hm, m.xattn);
        fused = x.fused;
        out.attention = x.attention;
    }
    auto h2 = moe_aggregate(tape, fused, m.moe);
    auto summaries = stage_summaries(tape, h0, h1, h2);
    out.z0 = summaries.z0;
    out.z1 = summaries.z1;
    out.z2 = summaries.z2;
    auto pred = head_forward(tape, h2, m.head);
    out.mu = pred.mu;
    out.log_var = pred.log_var;
    return out;
}

SampleForward forward_concat(Tape& tape, const Model& m, const SampleRecord& sample,
                             const DropoutCtx& dropout) {
    SampleForward out;
    auto h0 = encode_enzyme(tape, sample.enzyme_tokens, m.backbone, dropout);
    auto hm = encode_substrate(tape, sample.substrate_tokens, m.substrate_table);
    auto hg = encode_geometry(tape, geometry_input_of(sample), m.geometry);
    auto joined = tape.concat_cols(tape.concat_cols(tape.mean_pool_rows(h0),
                                                    tape.mean_pool_rows(hm)),
                                   tape.mean_pool_rows(hg));
    auto hidden = tape.gelu(tape.add_rowvec(tape.matmul(joined, m.fuse_w1), m.fuse_b1));
    auto state = tape.add_rowvec(tape.matmul(hidden, m.fuse_w2), m.fuse_b2);
    auto pred = head_forward(tape, state, m.head);
    out.mu = pred.mu;
    out.log_var = pred.log_var;
    return out;
}

}  // namespace

SampleForward model_forward(Tape& tape, const Model& model, const SampleRecord& sample,
                            const DropoutCtx& dropout) {
    switch (model.cfg.fusion_mode) {
        case FusionMode::staged: return forward_staged(tape, model, sample, dropout);
        case FusionMode::geometry_first:
            return forward_geometry_first(tape, model, sample, dropout);
        case FusionMode::concat_mlp: return forward_concat(tape, model, sample, dropout);
    }
    throw ConfigError("unreachable fusion mode");
}

SampleHandles handles_of(const SampleForward& fwd, double target_z) {
    SampleHandles h;
    h.mu = fwd.mu;
    h.log_var = fwd.log_var;
    h.alpha_tilde = fwd.alpha_tilde;
    h.selected = fwd.selected;
    h.z0 = fwd.z0;
    h.z1 = fwd.z1;
    h.z2 = fwd.z2;
    h.target_z = target_z;
    return h;
}

namespace {

TensorPtr leaf_copy(const TensorPtr& t) {
    if (!t) return nullptr;
    return make_tensor(t->rows, t->cols, t->data, true);
}

}  // namespace

SampleHandles leaf_copies_of(const SampleForward& fwd, double target_z) {
    SampleHandles h;
    h.mu = leaf_copy(fwd.mu);
    h.log_var = leaf_copy(fwd.log_var);
    h.alpha_tilde = leaf_copy(fwd.alpha_tilde);
    h.selected = fwd.selected;
    h.z0 = leaf_copy(fwd.z0);
    h.z1 = leaf_copy(fwd.z1);
    h.z2 = leaf_copy(fwd.z2);
    h.target_z = target_z;
    return h;
}

BatchLoss compose_batch_loss(
    Tape& tape, const Model& model, const std::vector<SampleHandles>& handles,
    const std::optional<std::pair<double, double>>& frozen_bandwidths) {
    if (handles.empty()) throw PreconditionError("compose_batch_loss: empty batch");
    const TrainConfig& cfg = model.cfg;

    BatchLoss out;
    TensorPtr task_sum;
    for (const auto& h : handles) {
        TensorPtr task = cfg.task_loss == TaskLoss::nll
                             ? gaussian_nll(tape, h.target_z, h.mu, h.log_var)
                             : squared_loss(tape, h.target_z, h.mu);
        task_sum = task_sum ? tape.add(task_sum, task) : task;
    }
    out.task = tape.scale(task_sum, 1.0 / static_cast<double>(handles.size()));

    if (model.has_gates() && cfg.lambda_balance >= 0.0) {
        std::vector<GateReport> reports;
        for (const auto& h : handles) {
            GateReport r;
            r.alpha_tilde = h.alpha_tilde;
            r.selected = h.selected;
            reports.push_back(std::move(r));
        }
        out.balance = balance_loss(tape, reports, cfg.experts, cfg.top_k);
    }

    if (model.has_stages() && cfg.use_esda) {
        if (handles.size() < 2) {
            out.align_skipped = true;
        } else {
            std::vector<StageSummaries> batch;
            for (const auto& h : handles) batch.push_back(StageSummaries{h.z0, h.z1, h.z2});
            if (frozen_bandwidths) {
                out.align = alignment_loss(tape, batch, frozen_bandwidths->first,
                                           frozen_bandwidths->second);
            } else {
                KernelConfig kernel = cfg.esda_bandwidth > 0.0
                                          ? KernelConfig::fixed(cfg.esda_bandwidth)
                                          : KernelConfig::median();
                out.align = alignment_loss(tape, batch, kernel);
            }
        }
    }

    out.total = total_loss(tape, out.task, out.balance, out.align,
                           LossWeights{cfg.lambda_balance, cfg.lambda_align});
    return out;
}

}  // namespace enzkit
