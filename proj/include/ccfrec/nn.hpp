#pragma once

// Transformer building blocks shared by the semantic-fusion module and the
// recommendation backbone: multi-head attention, feed-forward, and post-norm
// residual wiring, all expressed over the autodiff tape.

#include "ccfrec/autodiff.hpp"

namespace ccfrec::nn {

using ad::Mat;
using ad::Param;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct AttentionParams {
    Param* wq;
    Param* wk;
    Param* wv;
    Param* wo;
    Param* bq;
    Param* bk;
    Param* bv;
    Param* bo;
};

struct LayerNormParams {
    Param* gamma;
    Param* beta;
};

struct FeedForwardParams {
    Param* w1;
    Param* b1;
    Param* w2;
    Param* b2;
};

// Registration helpers; `prefix` becomes part of each tensor name.
AttentionParams make_attention(ParamStore& store, const std::string& prefix, int d,
                               std::mt19937_64& init_rng);
LayerNormParams make_layer_norm(ParamStore& store, const std::string& prefix, int d);
FeedForwardParams make_feed_forward(ParamStore& store, const std::string& prefix, int d,
                                    int inner, std::mt19937_64& init_rng);

Mat gaussian_init(long rows, long cols, double stddev, std::mt19937_64& rng);

// Scaled dot-product multi-head attention; queries come from `q_in`, keys and
// values from `kv_in`. `additive_mask` (q_rows x kv_rows) is added to the
// attention logits when present.
Var multi_head_attention(Tape& t, Var q_in, Var kv_in, const AttentionParams& p, int heads,
                         const Mat* additive_mask = nullptr);

Var feed_forward(Tape& t, Var x, const FeedForwardParams& p);

// Post-norm residual: LayerNorm(x + Dropout(sublayer_out)).
Var post_norm(Tape& t, Var x, Var sublayer_out, const LayerNormParams& ln, double dropout,
              double eps);

// Strictly lower-triangular-allowed mask: position i attends to j <= i.
Mat causal_mask(long n);

}  // namespace ccfrec::nn
