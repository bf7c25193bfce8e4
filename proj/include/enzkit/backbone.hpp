#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "enzkit/params.hpp"
#include "enzkit/tape.hpp"

namespace enzkit {

/**
 * Low-rank adapter on a frozen projection: output-path update
 * (scale / rank) * x * down^T * up^T. `up` starts at zero so a fresh adapter
 * is an exact no-op; dropout applies to the adapter input and only when a
 * dropout context is active.
 */
struct LoraAdapter {
    TensorPtr down;  // rank x D, small random init
    TensorPtr up;    // D x rank, zero init
    int rank = 0;
    double scale = 16.0;
    double dropout_rate = 0.1;

    bool present() const { return down != nullptr && up != nullptr; }
};

struct BackboneLayer {
    TensorPtr ln1_gain, ln1_bias;
    TensorPtr wq, wk, wv, wo;  // D x D, frozen
    TensorPtr ln2_gain, ln2_bias;
    TensorPtr ff1;  // D x 4D, frozen
    TensorPtr ff2;  // 4D x D, frozen
    LoraAdapter lora_q, lora_v;
};

// Frozen surrogate encoder standing in for a pretrained sequence model:
// pre-norm self-attention stack over a token embedding table, randomly
// initialized from a fixed seed and never updated.
struct BackboneParams {
    TensorPtr token_embed;  // V_enzyme x D, frozen
    std::vector<BackboneLayer> layers;
    int dim = 0;
    int max_seq_len = 0;
};

// Deterministic dropout keying: the mask for a given
// (seed, epoch, sample, layer, role, token, channel) never depends on thread
// scheduling or evaluation order.
struct DropoutCtx {
    bool active = false;
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::uint64_t sample = 0;

    static DropoutCtx off() { return DropoutCtx{}; }
    static DropoutCtx train(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample) {
        return DropoutCtx{true, seed, epoch, sample};
    }
};

struct GeometryInput {
    std::vector<std::array<double, 3>> coords;  // pocket coordinates, angstrom
    std::vector<int> residue_tokens;            // pocket residue identities
};

// Pose-invariant stand-in for a learned geometry encoder: per-residue
// pairwise-distance statistics plus an identity embedding, mapped through a
// small MLP.
struct GeometryParams {
    TensorPtr embed;   // V_enzyme x D
    TensorPtr w1, b1;  // (4+D) x D, 1 x D
    TensorPtr w2, b2;  // D x D, 1 x D
    int dim = 0;
};

BackboneParams build_backbone(ParamRegistry& reg, int dim, int layers, int max_seq_len,
                              std::uint64_t backbone_seed, int lora_rank, double lora_scale,
                              double lora_dropout, std::uint64_t seed);
GeometryParams build_geometry(ParamRegistry& reg, int dim, std::uint64_t seed);
TensorPtr build_substrate_table(ParamRegistry& reg, int dim, std::uint64_t seed);

// H_e: token embeddings through the frozen stack with adapters on the Q and V
// projections of every layer. Errors: out-of-vocabulary token (position
// named), sequence longer than max_seq_len.
TensorPtr encode_enzyme(Tape& tape, const std::vector<int>& tokens, const BackboneParams& params,
                        const DropoutCtx& dropout);

// H_m: pure row gather from the substrate embedding table.
TensorPtr encode_substrate(Tape& tape, const std::vector<int>& tokens, const TensorPtr& table);

// H_g: invariant distance features + identity embedding -> MLP. Identical
// output under any rigid motion of the coordinates.
TensorPtr encode_geometry(Tape& tape, const GeometryInput& input, const GeometryParams& params);

// The four distance statistics per pocket residue (min, mean, max to other
// residues; distance to centroid); exposed for tests.
std::vector<double> geometry_stats(const std::vector<std::array<double, 3>>& coords);

}  // namespace enzkit
