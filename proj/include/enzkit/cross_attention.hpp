#pragma once

#include "enzkit/params.hpp"
#include "enzkit/tape.hpp"

namespace enzkit {

/**
 * Stage 1: single-head cross-attention from enzyme tokens (queries) to
 * substrate tokens (keys/values), fused back with a residual connection and
 * post-norm. When d_k differs from the embedding width a learned output
 * projection maps the attended values back before the residual.
 */
struct CrossAttentionParams {
    TensorPtr wq, wk, wv;        // D x d_k
    TensorPtr out_proj;          // d_k x D, null when d_k == D
    TensorPtr ln_gain, ln_bias;  // 1 x D
    int dim = 0;
    int d_k = 0;
};

CrossAttentionParams build_cross_attention(ParamRegistry& reg, int dim, int d_k,
                                           std::uint64_t seed);

struct CrossAttentionOut {
    TensorPtr fused;      // H1, L_e x D
    TensorPtr attention;  // A_em, L_e x L_m; each row a probability vector
};

CrossAttentionOut cross_attention_forward(Tape& tape, const TensorPtr& enzyme,
                                          const TensorPtr& substrate,
                                          const CrossAttentionParams& params);

}  // namespace enzkit
