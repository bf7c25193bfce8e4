#include "enzkit/backbone.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "enzkit/errors.hpp"
#include "enzkit/vocab.hpp"

namespace enzkit {

namespace {

void check_tokens(const std::vector<int>& tokens, int vocab_size, const char* what) {
    if (tokens.empty()) throw PreconditionError(std::string(what) + ": empty token sequence");
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= vocab_size) {
            throw VocabError(std::string(what) + ": token id " + std::to_string(tokens[i]) +
                             " out of vocabulary at position " + std::to_string(i));
        }
    }
}

// Dropout on the adapter input; inverted scaling keeps expectations unchanged.
TensorPtr lora_path(Tape& tape, const TensorPtr& x, const LoraAdapter& ad,
                    const DropoutCtx& ctx, int layer, int role) {
    TensorPtr in = x;
    if (ctx.active && ad.dropout_rate > 0.0) {
        const double keep = 1.0 - ad.dropout_rate;
        std::vector<double> mask(x->data.size());
        for (int i = 0; i < x->rows; ++i) {
            for (int j = 0; j < x->cols; ++j) {
                const double u = keyed_uniform(ctx.seed, ctx.epoch, ctx.sample,
                                               static_cast<std::uint64_t>(layer),
                                               static_cast<std::uint64_t>(role),
                                               static_cast<std::uint64_t>(i),
                                               static_cast<std::uint64_t>(j));
                mask[static_cast<size_t>(i) * x->cols + j] = u < ad.dropout_rate ? 0.0 : 1.0 / keep;
            }
        }
        in = tape.mul(x, make_tensor(x->rows, x->cols, std::move(mask)));
    }
    auto low = tape.matmul_nt(in, ad.down);        // L x r
    auto update = tape.matmul_nt(low, ad.up);      // L x D
    return tape.scale(update, ad.scale / ad.rank);
}

}  // namespace

BackboneParams build_backbone(ParamRegistry& reg, int dim, int layers, int max_seq_len,
                              std::uint64_t backbone_seed, int lora_rank, double lora_scale,
                              double lora_dropout, std::uint64_t seed) {
    BackboneParams bb;
    bb.dim = dim;
    bb.max_seq_len = max_seq_len;
    bb.token_embed =
        reg.add_normal("backbone.embed", vocab::kEnzymeSize, dim, 1.0, backbone_seed, true);
    for (int l = 0; l < layers; ++l) {
        const std::string p = "backbone.l" + std::to_string(l) + ".";
        BackboneLayer layer;
        layer.ln1_gain = reg.add_ones(p + "ln1.gain", 1, dim, true);
        layer.ln1_bias = reg.add_zeros(p + "ln1.bias", 1, dim, true);
        layer.wq = reg.add_xavier(p + "attn.wq", dim, dim, backbone_seed, true);
        layer.wk = reg.add_xavier(p + "attn.wk", dim, dim, backbone_seed, true);
        layer.wv = reg.add_xavier(p + "attn.wv", dim, dim, backbone_seed, true);
        layer.wo = reg.add_xavier(p + "attn.wo", dim, dim, backbone_seed, true);
        layer.ln2_gain = reg.add_ones(p + "ln2.gain", 1, dim, true);
        layer.ln2_bias = reg.add_zeros(p + "ln2.bias", 1, dim, true);
        layer.ff1 = reg.add_xavier(p + "ff.w1", dim, 4 * dim, backbone_seed, true);
        layer.ff2 = reg.add_xavier(p + "ff.w2", 4 * dim, dim, backbone_seed, true);

        const std::string q = "lora.l" + std::to_string(l) + ".";
        layer.lora_q.down =
            reg.add_normal(q + "q.down", lora_rank, dim, 1.0 / std::sqrt(dim), seed);
        layer.lora_q.up = reg.add_zeros(q + "q.up", dim, lora_rank);
        layer.lora_q.rank = lora_rank;
        layer.lora_q.scale = lora_scale;
        layer.lora_q.dropout_rate = lora_dropout;
        layer.lora_v.down =
            reg.add_normal(q + "v.down", lora_rank, dim, 1.0 / std::sqrt(dim), seed);
        layer.lora_v.up = reg.add_zeros(q + "v.up", dim, lora_rank);
        layer.lora_v.rank = lora_rank;
        layer.lora_v.scale = lora_scale;
        layer.lora_v.dropout_rate = lora_dropout;
        bb.layers.push_back(std::move(layer));
    }
    return bb;
}

GeometryParams build_geometry(ParamRegistry& reg, int dim, std::uint64_t seed) {
    GeometryParams g;
    g.dim = dim;
    g.embed = reg.add_normal("geom.embed", vocab::kEnzymeSize, dim, 1.0, seed);
    g.w1 = reg.add_xavier("geom.mlp.w1", 4 + dim, dim, seed);
    g.b1 = reg.add_zeros("geom.mlp.b1", 1, dim);
    g.w2 = reg.add_xavier("geom.mlp.w2", dim, dim, seed);
    g.b2 = reg.add_zeros("geom.mlp.b2", 1, dim);
    return g;
}

TensorPtr build_substrate_table(ParamRegistry& reg, int dim, std::uint64_t seed) {
    return reg.add_normal("substrate.embed", vocab::kSubstrateSize, dim, 1.0, seed);
}

TensorPtr encode_enzyme(Tape& tape, const std::vector<int>& tokens, const BackboneParams& params,
                        const DropoutCtx& dropout) {
    check_tokens(tokens, params.token_embed->rows, "encode_enzyme");
    if (static_cast<int>(tokens.size()) > params.max_seq_len) {
        throw PreconditionError("encode_enzyme: sequence length " +
                                std::to_string(tokens.size()) + " exceeds max " +
                                std::to_string(params.max_seq_len));
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim));
    TensorPtr h = tape.gather_rows(params.token_embed, tokens);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const BackboneLayer& layer = params.layers[l];
        auto x1 = tape.layer_norm(h, layer.ln1_gain, layer.ln1_bias);
        auto q = tape.matmul(x1, layer.wq);
        if (layer.lora_q.present())
            q = tape.add(q, lora_path(tape, x1, layer.lora_q, dropout, static_cast<int>(l), 0));
        auto k = tape.matmul(x1, layer.wk);
        auto v = tape.matmul(x1, layer.wv);
        if (layer.lora_v.present())
            v = tape.add(v, lora_path(tape, x1, layer.lora_v, dropout, static_cast<int>(l), 1));
        auto attn = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), inv_sqrt_d));
        h = tape.add(h, tape.matmul(tape.matmul(attn, v), layer.wo));
        auto x2 = tape.layer_norm(h, layer.ln2_gain, layer.ln2_bias);
        h = tape.add(h, tape.matmul(tape.gelu(tape.matmul(x2, layer.ff1)), layer.ff2));
    }
    return h;
}

TensorPtr encode_substrate(Tape& tape, const std::vector<int>& tokens, const TensorPtr& table) {
    check_tokens(tokens, table->rows, "encode_substrate");
    return tape.gather_rows(table, tokens);
}

std::vector<double> geometry_stats(const std::vector<std::array<double, 3>>& coords) {
    const int n = static_cast<int>(coords.size());
    std::array<double, 3> centroid = {0, 0, 0};
    for (const auto& c : coords)
        for (int d = 0; d < 3; ++d) centroid[d] += c[d];
    for (int d = 0; d < 3; ++d) centroid[d] /= n;

    auto dist = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        double s = 0.0;
        for (int d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
        return std::sqrt(s);
    };

    std::vector<double> stats(static_cast<size_t>(n) * 4, 0.0);
    for (int i = 0; i < n; ++i) {
        double mn = 0.0, mx = 0.0, mean = 0.0;
        if (n > 1) {
            mn = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d = dist(coords[i], coords[j]);
                mn = std::min(mn, d);
                mx = std::max(mx, d);
                mean += d;
            }
            mean /= (n - 1);
        }
        stats[static_cast<size_t>(i) * 4 + 0] = mn;
        stats[static_cast<size_t>(i) * 4 + 1] = mean;
        stats[static_cast<size_t>(i) * 4 + 2] = mx;
        stats[static_cast<size_t>(i) * 4 + 3] = dist(coords[i], centroid);
    }
    return stats;
}

TensorPtr encode_geometry(Tape& tape, const GeometryInput& input, const GeometryParams& params) {
    const int n = static_cast<int>(input.coords.size());
    if (n < 1) throw PreconditionError("encode_geometry: empty pocket");
    if (input.residue_tokens.size() != input.coords.size()) {
        throw PreconditionError("encode_geometry: coordinate/identity count mismatch");
    }
    for (const auto& c : input.coords)
        for (double v : c)
            if (!std::isfinite(v)) throw NumericError("encode_geometry: non-finite coordinate");
    check_tokens(input.residue_tokens, params.embed->rows, "encode_geometry");

    auto stats = make_tensor(n, 4, geometry_stats(input.coords));
    auto ident = tape.gather_rows(params.embed, input.residue_tokens);
    auto features = tape.concat_cols(stats, ident);
    auto hidden = tape.gelu(tape.add_rowvec(tape.matmul(features, params.w1), params.b1));
    return tape.add_rowvec(tape.matmul(hidden, params.w2), params.b2);
}

}  // namespace enzkit
