#pragma once

// Assembles the semantic-fusion module, the recommendation backbone, and the
// optional item-ID table over one shared parameter store.

#include <optional>

#include "ccfrec/backbone.hpp"
#include "ccfrec/fusion.hpp"

namespace ccfrec {

struct AblationFlags {
    bool no_mcm = false;
    bool no_msa = false;
    bool no_text = false;
    bool random_code = false;
    bool global_emb = false;
    bool no_cross_attention = false;
    bool add_item_id = false;

    static AblationFlags parse(const std::string& csv);  // comma-separated names
    // At most one structural rewiring at a time.
    void validate() const;
    std::string to_string() const;
    bool any() const;
};

struct ModelConfig {
    int d = 128;
    int heads = 2;
    int sfm_layers = 2;
    int backbone_layers = 2;
    int ffn = 512;
    int m = 5;    // attribute views
    int k = 4;    // codes per view
    int C = 256;  // codebook size
    int max_seq_len = 20;
    int vocab_size = 0;
    double dropout = 0.2;
    double ln_eps = 1e-8;
    uint64_t init_seed = 42;
    AblationFlags ablation;

    int n_codes() const { return m * k; }
};

// Vocab-aligned, model-ready item data: semantic codes and projected
// attribute embeddings per item index.
struct ItemTensors {
    std::vector<std::vector<int>> codes;  // n_c ints per item
    std::vector<Mat> text;                // m x d per item

    int size() const { return static_cast<int>(codes.size()); }
};

class CcfrecModel {
public:
    explicit CcfrecModel(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const Sfm& sfm() const { return *sfm_; }
    Sfm& sfm() { return *sfm_; }
    const Backbone& backbone() const { return *backbone_; }

    // nullptr until enabled (add_item_id ablation or ID fine-tuning)
    Param* id_table() { return id_table_; }
    Param& ensure_id_table();

    FuseResult fuse(Tape& t, const ItemTensors& items, int item) const;
    FuseResult fuse_codes(Tape& t, std::span<const int> codes, const Mat& zt_proj) const;

    // Eval-mode fused representation (no dropout, no gradients).
    Eigen::RowVectorXd fuse_eval(const ItemTensors& items, int item) const;

private:
    ModelConfig cfg_;
    ParamStore store_;
    std::optional<Sfm> sfm_;
    std::optional<Backbone> backbone_;
    Param* id_table_ = nullptr;
};

}  // namespace ccfrec
