#pragma once

// Semantic-fusion module: learnable per-position code embeddings attend to
// themselves, then cross-attend into the item's projected attribute
// embeddings; mean pooling plus a pooled-code shortcut yields the fused item
// representation.

#include <optional>
#include <span>

#include "ccfrec/nn.hpp"

namespace ccfrec {

using ad::Mat;
using ad::Param;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct SfmConfig {
    int n_codes = 20;   // n_c = m * k
    int codebook = 256; // C; index C is the MASK row
    int d = 128;
    int heads = 2;
    int layers = 2;
    int ffn = 512;
    double dropout = 0.2;
    double ln_eps = 1e-8;
    bool text_kv = true;          // false: cross-attention keys/values = code embeddings
    bool mean_pool_only = false;  // true: skip the stack, mean-pool codes + text
};

struct SfmBlock {
    nn::AttentionParams self_attn;
    nn::LayerNormParams ln_self;
    nn::AttentionParams cross_attn;
    nn::LayerNormParams ln_cross;
    nn::FeedForwardParams ffn;
    nn::LayerNormParams ln_ffn;
};

struct FuseResult {
    Var e_tilde;  // 1 x d fused item representation
    Var states;   // n_c x d final code states (masked-code prediction reads these)
    Var z_codes;  // n_c x d code embeddings as looked up
};

class Sfm {
public:
    Sfm(ParamStore& store, const SfmConfig& cfg, std::mt19937_64& init_rng);

    const SfmConfig& config() const { return cfg_; }

    // Row l of the result is table_l[codes[l]]; values up to C select the
    // MASK embedding.
    Var lookup_codes(Tape& t, std::span<const int> codes) const;

    // zt_proj: m x d projected attribute embeddings for the item.
    FuseResult forward(Tape& t, std::span<const int> codes, const Mat& zt_proj) const;

    Param& code_table(int position) const { return *tables_[static_cast<std::size_t>(position)]; }

private:
    ParamStore& store_;
    SfmConfig cfg_;
    std::vector<Param*> tables_;  // n_c tables, each (C+1) x d
    std::vector<SfmBlock> blocks_;
};

struct MaskResult {
    std::vector<int> codes;     // masked code tuple; MASK = C
    std::vector<int> mask_set;  // positions selected for masking, ascending
};

// Selects ceil(rho * n) positions without replacement; each selected position
// becomes MASK with probability 0.8, a uniform random code with 0.1, and is
// left unchanged with 0.1 (the BERT recipe). With bert_rule=false every
// selected position becomes MASK.
MaskResult mask_codes(const std::vector<int>& codes, double rho, int C, std::mt19937_64& rng,
                      bool bert_rule = true);
MaskResult mask_codes(const std::vector<int>& codes, double rho, int C, uint64_t seed,
                      bool bert_rule = true);

}  // namespace ccfrec
