#include "ccfrec/model.hpp"

#include <sstream>

namespace ccfrec {

AblationFlags AblationFlags::parse(const std::string& csv) {
    AblationFlags f;
    std::stringstream ss(csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name.empty()) continue;
        if (name == "no_mcm")
            f.no_mcm = true;
        else if (name == "no_msa")
            f.no_msa = true;
        else if (name == "no_text")
            f.no_text = true;
        else if (name == "random_code")
            f.random_code = true;
        else if (name == "global_emb")
            f.global_emb = true;
        else if (name == "no_cross_attention")
            f.no_cross_attention = true;
        else if (name == "add_item_id")
            f.add_item_id = true;
        else
            throw ConfigError("unknown ablation: " + name);
    }
    f.validate();
    return f;
}

void AblationFlags::validate() const {
    int structural = static_cast<int>(no_text) + static_cast<int>(random_code) +
                     static_cast<int>(global_emb) + static_cast<int>(no_cross_attention);
    if (structural > 1)
        throw ConfigError("at most one structural ablation may be active at a time");
}

std::string AblationFlags::to_string() const {
    std::string out;
    auto append = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    append(no_mcm, "no_mcm");
    append(no_msa, "no_msa");
    append(no_text, "no_text");
    append(random_code, "random_code");
    append(global_emb, "global_emb");
    append(no_cross_attention, "no_cross_attention");
    append(add_item_id, "add_item_id");
    return out;
}

bool AblationFlags::any() const { return !to_string().empty(); }

CcfrecModel::CcfrecModel(ModelConfig cfg) : cfg_(cfg) {
    cfg_.ablation.validate();
    std::mt19937_64 init_rng = seeded_rng(cfg_.init_seed, "model-init");

    SfmConfig sfm_cfg;
    sfm_cfg.n_codes = cfg_.n_codes();
    sfm_cfg.codebook = cfg_.C;
    sfm_cfg.d = cfg_.d;
    sfm_cfg.heads = cfg_.heads;
    sfm_cfg.layers = cfg_.sfm_layers;
    sfm_cfg.ffn = cfg_.ffn;
    sfm_cfg.dropout = cfg_.dropout;
    sfm_cfg.ln_eps = cfg_.ln_eps;
    sfm_cfg.text_kv = !cfg_.ablation.no_text;
    sfm_cfg.mean_pool_only = cfg_.ablation.no_cross_attention;
    sfm_.emplace(store_, sfm_cfg, init_rng);

    BackboneConfig bb_cfg;
    bb_cfg.d = cfg_.d;
    bb_cfg.heads = cfg_.heads;
    bb_cfg.layers = cfg_.backbone_layers;
    bb_cfg.ffn = cfg_.ffn;
    bb_cfg.max_seq_len = cfg_.max_seq_len;
    bb_cfg.dropout = cfg_.dropout;
    bb_cfg.ln_eps = cfg_.ln_eps;
    backbone_.emplace(store_, bb_cfg, init_rng);

    if (cfg_.ablation.add_item_id) ensure_id_table();
}

Param& CcfrecModel::ensure_id_table() {
    if (!id_table_) {
        if (cfg_.vocab_size <= 0)
            throw ConfigError("vocab_size must be set before enabling the ID table");
        // zero-init: the first forward is identical to the base model
        id_table_ = &store_.create("id.table", cfg_.vocab_size, cfg_.d);
    }
    return *id_table_;
}

FuseResult CcfrecModel::fuse(Tape& t, const ItemTensors& items, int item) const {
    if (item < 0 || item >= items.size())
        throw Error("fuse: unknown item index " + std::to_string(item));
    return sfm_->forward(t, items.codes[static_cast<std::size_t>(item)],
                         items.text[static_cast<std::size_t>(item)]);
}

FuseResult CcfrecModel::fuse_codes(Tape& t, std::span<const int> codes,
                                   const Mat& zt_proj) const {
    return sfm_->forward(t, codes, zt_proj);
}

Eigen::RowVectorXd CcfrecModel::fuse_eval(const ItemTensors& items, int item) const {
    Tape t(false);
    return t.value(fuse(t, items, item).e_tilde).row(0);
}

}  // namespace ccfrec
