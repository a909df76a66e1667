#pragma once

// SASRec-style unidirectional Transformer over fused item representations
// with learned absolute position embeddings.

#include <span>

#include "ccfrec/nn.hpp"

namespace ccfrec {

using ad::Mat;
using ad::Param;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct BackboneConfig {
    int d = 128;
    int heads = 2;
    int layers = 2;
    int ffn = 512;
    int max_seq_len = 20;  // N
    double dropout = 0.2;
    double ln_eps = 1e-8;
};

struct BackboneBlock {
    nn::AttentionParams attn;
    nn::LayerNormParams ln_attn;
    nn::FeedForwardParams ffn;
    nn::LayerNormParams ln_ffn;
};

struct BackboneResult {
    Var states;  // n x d hidden states of the final layer
    Var r;       // 1 x d user preference vector (last position)
};

class Backbone {
public:
    Backbone(ParamStore& store, const BackboneConfig& cfg, std::mt19937_64& init_rng);

    const BackboneConfig& config() const { return cfg_; }

    // reps: n x d fused item representations, oldest first; 1 <= n <= N.
    BackboneResult forward(Tape& t, Var reps) const;

private:
    ParamStore& store_;
    BackboneConfig cfg_;
    Param* positions_;  // N x d
    std::vector<BackboneBlock> blocks_;
};

// Elementwise sum of per-position ID embeddings onto the fused reps.
Var add_id_embeddings(Tape& t, Var reps, Param& id_table, std::span<const int> items);

}  // namespace ccfrec
