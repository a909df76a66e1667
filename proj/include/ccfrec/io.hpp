#pragma once

// Artifact formats and configuration. Every produced artifact carries a
// header with a format version and the producing stage's config hash, which
// is how the pipeline detects stale or missing inputs and skips redundant
// recomputation.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "ccfrec/autodiff.hpp"
#include "ccfrec/corpus.hpp"
#include "ccfrec/quantizer.hpp"
#include "ccfrec/textenc.hpp"

namespace ccfrec {

namespace fs = std::filesystem;

constexpr uint32_t kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Flat key-value configuration with typed getters. Unknown keys are kept
// verbatim so forward-compatible settings survive a round trip.
// ---------------------------------------------------------------------------
class Config {
public:
    static Config defaults();
    static Config load(const fs::path& path);  // defaults overlaid with the file

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;

    // Sorted "key=value" lines; input to stage hashing.
    std::string canonical(const std::vector<std::string>& keys) const;
    std::string canonical_all() const;
    const std::map<std::string, std::string>& entries() const { return kv_; }
    void save(const fs::path& path) const;

private:
    std::map<std::string, std::string> kv_;
};

uint64_t file_content_hash(const fs::path& path);

// ---------------------------------------------------------------------------
// Text artifacts (items / interactions / codes) carry a '#' header line.
// ---------------------------------------------------------------------------
std::string text_header(const std::string& kind, uint64_t config_hash);
// Parses "# ccfrec <kind> v<version> cfg=<hex>" from the first line.
std::optional<uint64_t> read_text_header(const fs::path& path, const std::string& kind);

void write_items_file(const fs::path& path, const std::vector<Item>& items,
                      const std::vector<std::string>& fields, uint64_t config_hash);
void write_interactions_file(const fs::path& path, const std::vector<Interaction>& interactions,
                             uint64_t config_hash);

void write_codes_file(const fs::path& path, const CodeMap& codes, uint64_t config_hash);
CodeMap read_codes_file(const fs::path& path);

// ---------------------------------------------------------------------------
// Binary artifacts. All integers little-endian; matrices row-major.
// ---------------------------------------------------------------------------

// Embedding cache: magic "CCEM", version, item_count, m, d_e (u32) +
// config hash (u64), then the item-id table and float32 matrices.
void write_embedding_cache(const fs::path& path, const EmbeddingMap& embeddings,
                           uint64_t config_hash);
EmbeddingMap read_embedding_cache(const fs::path& path);

// PCA transform: stored in doubles (exact round trip).
void write_pca(const fs::path& path, const PcaTransform& pca, uint64_t config_hash);
PcaTransform read_pca(const fs::path& path);

// Codebook: magic "CCCB", header (method, m, k, C, w) + float32 centroids.
void write_codebook(const fs::path& path, const Codebook& cb, uint64_t config_hash);
Codebook read_codebook(const fs::path& path);

// Fused-representation cache: item-id-ordered float32 matrix |V| x d.
void write_rep_cache(const fs::path& path, const Mat& reps,
                     const std::vector<std::string>& vocab, uint64_t config_hash);
Mat read_rep_cache(const fs::path& path, std::vector<std::string>* vocab = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints: named-tensor archive in doubles (bitwise round trip), plus
// optimizer state and training progress.
// ---------------------------------------------------------------------------
struct Checkpoint {
    std::map<std::string, Mat> values;
    std::map<std::string, Mat> adam_m;
    std::map<std::string, Mat> adam_v;
    long adam_step = 0;
    int epoch = 0;
    double best_val_ndcg10 = 0.0;
};

Checkpoint snapshot_params(const ad::ParamStore& params, long adam_step, int epoch,
                           double best_val);
// Restores values (and Adam state where present) into matching names;
// missing/extra names raise unless `partial` is set.
void restore_params(const Checkpoint& ckpt, ad::ParamStore& params, bool partial = false);

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt, uint64_t config_hash);
Checkpoint load_checkpoint(const fs::path& path);

// Reads just the config hash from any ccfrec artifact (binary or text);
// std::nullopt if the file is absent or not a recognized artifact.
std::optional<uint64_t> artifact_config_hash(const fs::path& path);

}  // namespace ccfrec
