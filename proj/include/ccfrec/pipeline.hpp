#pragma once

// Stage orchestration shared by the CLI and the test suites. Every stage
// hashes its relevant configuration plus the content of its input artifacts;
// outputs carry that hash, and a stage whose outputs already match is
// skipped.

#include <iosfwd>

#include "ccfrec/evaluator.hpp"
#include "ccfrec/io.hpp"
#include "ccfrec/model.hpp"
#include "ccfrec/synthetic.hpp"
#include "ccfrec/trainer.hpp"

namespace ccfrec::pipeline {

struct Paths {
    fs::path workdir;

    fs::path items_raw() const { return workdir / "items.jsonl"; }
    fs::path interactions_raw() const { return workdir / "interactions.tsv"; }
    fs::path items_norm() const { return workdir / "items.norm.jsonl"; }
    fs::path interactions_norm() const { return workdir / "interactions.filtered.tsv"; }
    fs::path emb_cache() const { return workdir / "emb.cache"; }
    fs::path pca() const { return workdir / "pca.bin"; }
    fs::path codes() const { return workdir / "codes.tsv"; }
    fs::path codebook() const { return workdir / "codebook.bin"; }
    fs::path reps() const { return workdir / "reps.bin"; }
    fs::path run_dir(uint64_t train_hash, bool finetuned = false) const {
        return workdir / "runs" /
               ("run_" + hex64(train_hash) + (finetuned ? "-ids" : ""));
    }
};

struct StageStatus {
    bool skipped = false;
    std::string message;
};

// Stage hashes (exposed so `eval`/`finetune-ids` can locate the train run).
uint64_t synth_hash(const Config& cfg);
uint64_t ingest_hash(const Config& cfg, const fs::path& items, const fs::path& interactions);
uint64_t embed_hash(const Config& cfg, const Paths& paths);
uint64_t quantize_hash(const Config& cfg, const Paths& paths);
uint64_t train_hash(const Config& cfg, const Paths& paths);

StageStatus run_synth(const Config& cfg, const Paths& paths);
StageStatus run_ingest(const Config& cfg, const Paths& paths, const fs::path& items_in,
                       const fs::path& interactions_in);
StageStatus run_embed(const Config& cfg, const Paths& paths);
StageStatus run_quantize(const Config& cfg, const Paths& paths);
StageStatus run_train(const Config& cfg, const Paths& paths, const TrainHooks& hooks = {});
StageStatus run_export_reps(const Config& cfg, const Paths& paths);
StageStatus run_finetune_ids(const Config& cfg, const Paths& paths);

// Prints one JSON record per K to `out` and appends them to the run's
// eval.jsonl. `split` is "test" or "valid".
MetricReport run_eval(const Config& cfg, const Paths& paths, const std::string& split,
                      std::ostream& out, bool finetuned = false);

// ---- assembly helpers ----

struct LoadedData {
    SplitDataset splits;
    ItemTensors tensors;  // vocab-aligned
};

// Loads splits and model-ready tensors from the normalized artifacts.
LoadedData load_data(const Config& cfg, const Paths& paths);

ModelConfig model_config_from(const Config& cfg, int m_views, int vocab_size);
TrainConfig train_config_from(const Config& cfg);
LossConfig loss_config_from(const Config& cfg);

// Rebuilds the trained model for `eval`, `export-reps`, `finetune-ids`.
std::unique_ptr<CcfrecModel> load_trained_model(const Config& cfg, const Paths& paths,
                                                const LoadedData& data, bool finetuned = false);

}  // namespace ccfrec::pipeline
