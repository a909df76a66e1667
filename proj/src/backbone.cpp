#include "ccfrec/backbone.hpp"

namespace ccfrec {

Backbone::Backbone(ParamStore& store, const BackboneConfig& cfg, std::mt19937_64& init_rng)
    : store_(store), cfg_(cfg) {
    positions_ = &store_.create("bb.pos",
                                nn::gaussian_init(cfg_.max_seq_len, cfg_.d, 0.02, init_rng));
    for (int b = 0; b < cfg_.layers; ++b) {
        std::string prefix = "bb.block" + std::to_string(b);
        BackboneBlock blk;
        blk.attn = nn::make_attention(store_, prefix + ".attn", cfg_.d, init_rng);
        blk.ln_attn = nn::make_layer_norm(store_, prefix + ".ln_attn", cfg_.d);
        blk.ffn = nn::make_feed_forward(store_, prefix + ".ffn", cfg_.d, cfg_.ffn, init_rng);
        blk.ln_ffn = nn::make_layer_norm(store_, prefix + ".ln_ffn", cfg_.d);
        blocks_.push_back(blk);
    }
}

BackboneResult Backbone::forward(Tape& t, Var reps) const {
    const long n = reps.rows();
    if (n == 0) throw EmptySequenceError();
    if (n > cfg_.max_seq_len)
        throw Error("sequence length " + std::to_string(n) + " exceeds N=" +
                    std::to_string(cfg_.max_seq_len));

    std::vector<int> pos_idx(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) pos_idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
    Var h = t.add(reps, t.rows_of(*positions_, pos_idx));

    const Mat mask = nn::causal_mask(n);
    for (const auto& blk : blocks_) {
        Var attn_out = nn::multi_head_attention(t, h, h, blk.attn, cfg_.heads, &mask);
        h = nn::post_norm(t, h, attn_out, blk.ln_attn, cfg_.dropout, cfg_.ln_eps);
        Var ffn_out = nn::feed_forward(t, h, blk.ffn);
        h = nn::post_norm(t, h, ffn_out, blk.ln_ffn, cfg_.dropout, cfg_.ln_eps);
    }

    Var r = t.pick_rows(h, {static_cast<int>(n - 1)});
    return BackboneResult{h, r};
}

Var add_id_embeddings(Tape& t, Var reps, Param& id_table, std::span<const int> items) {
    if (static_cast<long>(items.size()) != reps.rows())
        throw Error("add_id_embeddings: one item per row required");
    std::vector<int> idx(items.begin(), items.end());
    return t.add(reps, t.rows_of(id_table, std::move(idx)));
}

}  // namespace ccfrec
