#include "ccfrec/nn.hpp"

#include <cmath>

namespace ccfrec::nn {

Mat gaussian_init(long rows, long cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Mat m(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) m(r, c) = normal(rng);
    return m;
}

AttentionParams make_attention(ParamStore& store, const std::string& prefix, int d,
                               std::mt19937_64& init_rng) {
    AttentionParams p;
    p.wq = &store.create(prefix + ".wq", gaussian_init(d, d, 0.02, init_rng));
    p.wk = &store.create(prefix + ".wk", gaussian_init(d, d, 0.02, init_rng));
    p.wv = &store.create(prefix + ".wv", gaussian_init(d, d, 0.02, init_rng));
    p.wo = &store.create(prefix + ".wo", gaussian_init(d, d, 0.02, init_rng));
    p.bq = &store.create(prefix + ".bq", 1, d);
    p.bk = &store.create(prefix + ".bk", 1, d);
    p.bv = &store.create(prefix + ".bv", 1, d);
    p.bo = &store.create(prefix + ".bo", 1, d);
    return p;
}

LayerNormParams make_layer_norm(ParamStore& store, const std::string& prefix, int d) {
    LayerNormParams p;
    p.gamma = &store.create(prefix + ".gamma", Mat::Ones(1, d));
    p.beta = &store.create(prefix + ".beta", 1, d);
    return p;
}

FeedForwardParams make_feed_forward(ParamStore& store, const std::string& prefix, int d,
                                    int inner, std::mt19937_64& init_rng) {
    FeedForwardParams p;
    p.w1 = &store.create(prefix + ".w1", gaussian_init(d, inner, 0.02, init_rng));
    p.b1 = &store.create(prefix + ".b1", 1, inner);
    p.w2 = &store.create(prefix + ".w2", gaussian_init(inner, d, 0.02, init_rng));
    p.b2 = &store.create(prefix + ".b2", 1, d);
    return p;
}

Var multi_head_attention(Tape& t, Var q_in, Var kv_in, const AttentionParams& p, int heads,
                         const Mat* additive_mask) {
    const int d = static_cast<int>(p.wq->value.cols());
    if (d % heads != 0) throw Error("attention width not divisible by head count");
    const int dh = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Var q = t.add_rowvec(t.matmul(q_in, t.param(*p.wq)), t.param(*p.bq));
    Var k = t.add_rowvec(t.matmul(kv_in, t.param(*p.wk)), t.param(*p.bk));
    Var v = t.add_rowvec(t.matmul(kv_in, t.param(*p.wv)), t.param(*p.bv));

    std::vector<Var> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = t.slice_cols(q, h * dh, dh);
        Var kh = t.slice_cols(k, h * dh, dh);
        Var vh = t.slice_cols(v, h * dh, dh);
        Var scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
        Var probs = t.softmax_rows(scores, additive_mask);
        head_outputs.push_back(t.matmul(probs, vh));
    }
    Var concat = heads == 1 ? head_outputs.front() : t.concat_cols(head_outputs);
    return t.add_rowvec(t.matmul(concat, t.param(*p.wo)), t.param(*p.bo));
}

Var feed_forward(Tape& t, Var x, const FeedForwardParams& p) {
    Var inner = t.gelu(t.add_rowvec(t.matmul(x, t.param(*p.w1)), t.param(*p.b1)));
    return t.add_rowvec(t.matmul(inner, t.param(*p.w2)), t.param(*p.b2));
}

Var post_norm(Tape& t, Var x, Var sublayer_out, const LayerNormParams& ln, double dropout,
              double eps) {
    Var summed = t.add(x, t.dropout(sublayer_out, dropout));
    return t.layer_norm_rows(summed, t.param(*ln.gamma), t.param(*ln.beta), eps);
}

Mat causal_mask(long n) {
    Mat m = Mat::Zero(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = i + 1; j < n; ++j) m(i, j) = -1e30;
    return m;
}

}  // namespace ccfrec::nn
