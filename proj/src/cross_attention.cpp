#include "enzkit/cross_attention.hpp"

#include <cmath>

#include "enzkit/errors.hpp"

namespace enzkit {

CrossAttentionParams build_cross_attention(ParamRegistry& reg, int dim, int d_k,
                                           std::uint64_t seed) {
    CrossAttentionParams p;
    p.dim = dim;
    p.d_k = d_k;
    p.wq = reg.add_xavier("xattn.wq", dim, d_k, seed);
    p.wk = reg.add_xavier("xattn.wk", dim, d_k, seed);
    p.wv = reg.add_xavier("xattn.wv", dim, d_k, seed);
    if (d_k != dim) p.out_proj = reg.add_xavier("xattn.out_proj", d_k, dim, seed);
    p.ln_gain = reg.add_ones("xattn.ln.gain", 1, dim);
    p.ln_bias = reg.add_zeros("xattn.ln.bias", 1, dim);
    return p;
}

CrossAttentionOut cross_attention_forward(Tape& tape, const TensorPtr& enzyme,
                                          const TensorPtr& substrate,
                                          const CrossAttentionParams& params) {
    if (enzyme->cols != params.dim || substrate->cols != params.dim) {
        throw ShapeError("cross_attention: inputs must be *x" + std::to_string(params.dim) +
                         ", got " + shape_str(*enzyme) + " and " + shape_str(*substrate));
    }
    if (enzyme->rows < 1 || substrate->rows < 1) {
        throw PreconditionError("cross_attention: both token streams must be non-empty");
    }
    auto q = tape.matmul(enzyme, params.wq);
    auto k = tape.matmul(substrate, params.wk);
    auto v = tape.matmul(substrate, params.wv);
    auto scores = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(params.d_k));
    auto attention = tape.softmax_rows(scores);
    auto attended = tape.matmul(attention, v);
    if (params.out_proj) attended = tape.matmul(attended, params.out_proj);
    auto fused = tape.layer_norm(tape.add(enzyme, attended), params.ln_gain, params.ln_bias);
    return CrossAttentionOut{fused, attention};
}

}  // namespace enzkit
