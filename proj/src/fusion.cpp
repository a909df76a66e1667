#include "ccfrec/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace ccfrec {

Sfm::Sfm(ParamStore& store, const SfmConfig& cfg, std::mt19937_64& init_rng)
    : store_(store), cfg_(cfg) {
    tables_.reserve(static_cast<std::size_t>(cfg_.n_codes));
    for (int l = 0; l < cfg_.n_codes; ++l) {
        tables_.push_back(&store_.create(
            "sfm.table." + std::to_string(l),
            nn::gaussian_init(cfg_.codebook + 1, cfg_.d, 0.02, init_rng)));
    }
    for (int b = 0; b < cfg_.layers; ++b) {
        std::string prefix = "sfm.block" + std::to_string(b);
        SfmBlock blk;
        blk.self_attn = nn::make_attention(store_, prefix + ".self", cfg_.d, init_rng);
        blk.ln_self = nn::make_layer_norm(store_, prefix + ".ln_self", cfg_.d);
        blk.cross_attn = nn::make_attention(store_, prefix + ".cross", cfg_.d, init_rng);
        blk.ln_cross = nn::make_layer_norm(store_, prefix + ".ln_cross", cfg_.d);
        blk.ffn = nn::make_feed_forward(store_, prefix + ".ffn", cfg_.d, cfg_.ffn, init_rng);
        blk.ln_ffn = nn::make_layer_norm(store_, prefix + ".ln_ffn", cfg_.d);
        blocks_.push_back(blk);
    }
}

Var Sfm::lookup_codes(Tape& t, std::span<const int> codes) const {
    if (static_cast<int>(codes.size()) != cfg_.n_codes)
        throw Error("lookup_codes: expected " + std::to_string(cfg_.n_codes) + " codes, got " +
                    std::to_string(codes.size()));
    std::vector<Var> rows;
    rows.reserve(codes.size());
    for (int l = 0; l < cfg_.n_codes; ++l) {
        if (codes[static_cast<std::size_t>(l)] < 0 ||
            codes[static_cast<std::size_t>(l)] > cfg_.codebook)
            throw Error("code value out of range at position " + std::to_string(l));
        rows.push_back(t.rows_of(*tables_[static_cast<std::size_t>(l)],
                                 {codes[static_cast<std::size_t>(l)]}));
    }
    return t.vstack(rows);
}

FuseResult Sfm::forward(Tape& t, std::span<const int> codes, const Mat& zt_proj) const {
    if (zt_proj.cols() != cfg_.d) throw Error("sfm_forward: text embedding width != d");
    Var z_codes = lookup_codes(t, codes);
    Var text = t.constant(zt_proj);

    if (cfg_.mean_pool_only) {
        // attention-free variant: the item representation is the mean of all
        // code and text rows
        Var pooled = t.mean_rows(t.vstack({z_codes, text}));
        return FuseResult{pooled, z_codes, z_codes};
    }

    Var h = z_codes;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const SfmBlock& blk = blocks_[b];
        Var self_out = nn::multi_head_attention(t, h, h, blk.self_attn, cfg_.heads);
        h = nn::post_norm(t, h, self_out, blk.ln_self, cfg_.dropout, cfg_.ln_eps);

        Var kv = cfg_.text_kv ? text : z_codes;
        Var cross_out = nn::multi_head_attention(t, h, kv, blk.cross_attn, cfg_.heads);
        h = nn::post_norm(t, h, cross_out, blk.ln_cross, cfg_.dropout, cfg_.ln_eps);

        Var ffn_out = nn::feed_forward(t, h, blk.ffn);
        h = nn::post_norm(t, h, ffn_out, blk.ln_ffn, cfg_.dropout, cfg_.ln_eps);

        if (!t.value(h).allFinite())
            throw NonFiniteError("sfm_forward: block " + std::to_string(b));
    }

    Var e = t.mean_rows(h);
    Var e_tilde = t.add(e, t.mean_rows(z_codes));
    return FuseResult{e_tilde, h, z_codes};
}

MaskResult mask_codes(const std::vector<int>& codes, double rho, int C, std::mt19937_64& rng,
                      bool bert_rule) {
    if (rho <= 0.0 || rho > 1.0) throw Error("mask_codes: rho must be in (0, 1]");
    const int n = static_cast<int>(codes.size());
    const int n_mask = static_cast<int>(std::ceil(rho * n));

    // partial Fisher-Yates for a uniform sample without replacement
    std::vector<int> positions(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) positions[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n_mask; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(positions[static_cast<std::size_t>(i)],
                  positions[static_cast<std::size_t>(pick(rng))]);
    }

    MaskResult res;
    res.codes = codes;
    res.mask_set.assign(positions.begin(), positions.begin() + n_mask);
    std::sort(res.mask_set.begin(), res.mask_set.end());

    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> random_code(0, C - 1);
    for (int pos : res.mask_set) {
        if (!bert_rule) {
            res.codes[static_cast<std::size_t>(pos)] = C;
            continue;
        }
        double r = u(rng);
        if (r < 0.8)
            res.codes[static_cast<std::size_t>(pos)] = C;
        else if (r < 0.9)
            res.codes[static_cast<std::size_t>(pos)] = random_code(rng);
        // else: keep the original code
    }
    return res;
}

MaskResult mask_codes(const std::vector<int>& codes, double rho, int C, uint64_t seed,
                      bool bert_rule) {
    std::mt19937_64 rng(seed);
    return mask_codes(codes, rho, C, rng, bert_rule);
}

}  // namespace ccfrec
