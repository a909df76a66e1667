#include "ccfrec/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace ccfrec::pipeline {

using nlohmann::json;

namespace {

const std::vector<std::string> kSynthKeys = {"seed",
                                             "synth.topics",
                                             "synth.items_per_topic",
                                             "synth.users",
                                             "synth.mean_len",
                                             "synth.p_stay"};
const std::vector<std::string> kIngestKeys = {"corpus.k_core", "corpus.max_tokens"};
const std::vector<std::string> kEmbedKeys = {"enc.d_e", "model.d", "ablation", "seed"};
const std::vector<std::string> kQuantKeys = {"quant.method", "quant.k", "quant.C", "ablation",
                                             "seed"};
const std::vector<std::string> kTrainKeys = {
    "corpus.max_len", "model.d",        "model.heads",   "model.sfm_layers",
    "model.backbone_layers", "model.ffn",      "quant.k",       "quant.C",
    "loss.tau",       "loss.rho",       "loss.alpha",    "loss.beta",
    "loss.negatives", "loss.uniform_k", "train.lr",      "train.dropout",
    "train.batch",    "train.max_epochs", "train.patience", "eval.exclude_seen",
    "ablation",       "seed"};

uint64_t stage_hash(const Config& cfg, const std::vector<std::string>& keys,
                    const std::vector<fs::path>& inputs) {
    uint64_t h = fnv1a64(cfg.canonical(keys));
    for (const auto& p : inputs) h = hash_combine(h, file_content_hash(p));
    return h;
}

bool outputs_match(uint64_t expected, const std::vector<fs::path>& outputs) {
    for (const auto& p : outputs) {
        auto h = artifact_config_hash(p);
        if (!h || *h != expected) return false;
    }
    return true;
}

void require_artifact(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p))
        throw MissingArtifactError(p.string() + " (run `" + producer + "` first)");
}

// float32 rounding so that freshly computed embeddings and cache-loaded ones
// are the same numbers everywhere downstream
void round_to_f32(Mat& m) {
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c)
            m(r, c) = static_cast<double>(static_cast<float>(m(r, c)));
}

std::string concat_attributes(const Item& item) {
    std::string all;
    for (const auto& a : item.attributes) {
        if (!all.empty()) all += ' ';
        all += a;
    }
    return all;
}

}  // namespace

uint64_t synth_hash(const Config& cfg) { return stage_hash(cfg, kSynthKeys, {}); }

uint64_t ingest_hash(const Config& cfg, const fs::path& items, const fs::path& interactions) {
    return stage_hash(cfg, kIngestKeys, {items, interactions});
}

uint64_t embed_hash(const Config& cfg, const Paths& paths) {
    return stage_hash(cfg, kEmbedKeys, {paths.items_norm()});
}

uint64_t quantize_hash(const Config& cfg, const Paths& paths) {
    return stage_hash(cfg, kQuantKeys, {paths.emb_cache()});
}

uint64_t train_hash(const Config& cfg, const Paths& paths) {
    return stage_hash(cfg, kTrainKeys,
                      {paths.interactions_norm(), paths.emb_cache(), paths.pca(), paths.codes()});
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

StageStatus run_synth(const Config& cfg, const Paths& paths) {
    uint64_t h = synth_hash(cfg);
    if (outputs_match(h, {paths.items_raw(), paths.interactions_raw()}))
        return {true, "synth: outputs up to date"};

    SyntheticSpec spec;
    spec.topics = cfg.get_int("synth.topics");
    spec.items_per_topic = cfg.get_int("synth.items_per_topic");
    spec.users = cfg.get_int("synth.users");
    spec.mean_len = cfg.get_double("synth.mean_len");
    spec.p_stay = cfg.get_double("synth.p_stay");
    spec.seed = cfg.get_u64("seed");

    SyntheticCorpus corpus = generate_synthetic(spec);
    fs::create_directories(paths.workdir);
    write_items_file(paths.items_raw(), corpus.items, default_attribute_fields(), h);
    write_interactions_file(paths.interactions_raw(), corpus.interactions, h);
    return {false, "synth: " + std::to_string(corpus.items.size()) + " items, " +
                       std::to_string(corpus.interactions.size()) + " interactions"};
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

StageStatus run_ingest(const Config& cfg, const Paths& paths, const fs::path& items_in,
                       const fs::path& interactions_in) {
    require_artifact(items_in, "synth");
    require_artifact(interactions_in, "synth");
    uint64_t h = ingest_hash(cfg, items_in, interactions_in);
    if (outputs_match(h, {paths.items_norm(), paths.interactions_norm()}))
        return {true, "ingest: outputs up to date"};

    IngestResult ingested = ingest_items(items_in, default_attribute_fields(),
                                         static_cast<std::size_t>(cfg.get_int("corpus.max_tokens")));
    std::vector<Interaction> interactions = read_interactions(interactions_in);

    // drop interactions whose item has no metadata, then k-core filter
    std::unordered_set<std::string> known;
    for (const auto& item : ingested.items) known.insert(item.item_id);
    std::vector<Interaction> with_meta;
    int orphaned = 0;
    for (auto& r : interactions) {
        if (known.count(r.item_id))
            with_meta.push_back(std::move(r));
        else
            ++orphaned;
    }
    std::vector<Interaction> filtered = k_core_filter(std::move(with_meta),
                                                      cfg.get_int("corpus.k_core"));

    // keep metadata only for surviving items
    std::unordered_set<std::string> surviving;
    for (const auto& r : filtered) surviving.insert(r.item_id);
    std::vector<Item> kept_items;
    for (auto& item : ingested.items)
        if (surviving.count(item.item_id)) kept_items.push_back(std::move(item));

    fs::create_directories(paths.workdir);
    write_items_file(paths.items_norm(), kept_items, default_attribute_fields(), h);
    write_interactions_file(paths.interactions_norm(), filtered, h);

    std::string msg = "ingest: " + std::to_string(kept_items.size()) + " items, " +
                      std::to_string(filtered.size()) + " interactions after " +
                      cfg.get_str("corpus.k_core") + "-core";
    if (ingested.rejected_records) msg += ", " + std::to_string(ingested.rejected_records) +
                                          " records without item_id rejected";
    if (orphaned) msg += ", " + std::to_string(orphaned) + " interactions without metadata dropped";
    return {false, msg};
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

StageStatus run_embed(const Config& cfg, const Paths& paths) {
    require_artifact(paths.items_norm(), "ingest");
    uint64_t h = embed_hash(cfg, paths);
    if (outputs_match(h, {paths.emb_cache(), paths.pca()}))
        return {true, "embed: outputs up to date"};

    AblationFlags ablation = AblationFlags::parse(cfg.get_str("ablation"));
    IngestResult ingested = ingest_items(paths.items_norm());
    std::vector<Item> items = std::move(ingested.items);
    if (ablation.global_emb) {
        // single global view: all attribute texts concatenated
        for (auto& item : items) item.attributes = {concat_attributes(item)};
    }

    HashingTextEncoder encoder(cfg.get_int("enc.d_e"),
                               hash_combine(cfg.get_u64("seed"), fnv1a64("encoder")));
    EmbeddingMap embeddings = encode_corpus(items, encoder);
    for (auto& [id, emb] : embeddings) round_to_f32(emb);

    const int d = cfg.get_int("model.d");
    const long m = embeddings.begin()->second.rows();
    Mat all_rows(static_cast<long>(embeddings.size()) * m, encoder.dim());
    long row = 0;
    for (const auto& [id, emb] : embeddings)
        for (long a = 0; a < m; ++a) all_rows.row(row++) = emb.row(a);
    PcaTransform pca = fit_pca(all_rows, d);

    write_embedding_cache(paths.emb_cache(), embeddings, h);
    write_pca(paths.pca(), pca, h);

    std::string msg = "embed: " + std::to_string(embeddings.size()) + " items x " +
                      std::to_string(m) + " views, d_e=" + cfg.get_str("enc.d_e") +
                      " -> d=" + std::to_string(d);
    if (pca.effective_rank < d)
        msg += " (warning: data rank " + std::to_string(pca.effective_rank) +
               " < d, orthonormal completion used)";
    return {false, msg};
}

// ---------------------------------------------------------------------------
// quantize
// ---------------------------------------------------------------------------

StageStatus run_quantize(const Config& cfg, const Paths& paths) {
    require_artifact(paths.emb_cache(), "embed");
    uint64_t h = quantize_hash(cfg, paths);
    AblationFlags ablation = AblationFlags::parse(cfg.get_str("ablation"));
    std::vector<fs::path> outputs = {paths.codes()};
    if (!ablation.random_code) outputs.push_back(paths.codebook());
    if (outputs_match(h, outputs)) return {true, "quantize: outputs up to date"};

    EmbeddingMap raw = read_embedding_cache(paths.emb_cache());
    const int k = cfg.get_int("quant.k");
    const int C = cfg.get_int("quant.C");
    const int m = static_cast<int>(raw.begin()->second.rows());
    uint64_t seed = hash_combine(cfg.get_u64("seed"), fnv1a64("quantizer"));

    if (ablation.random_code) {
        std::vector<std::string> ids;
        for (const auto& [id, emb] : raw) ids.push_back(id);
        CodeMap codes = random_codes(ids, m, k, C, seed);
        write_codes_file(paths.codes(), codes, h);
        return {false, "quantize: random codes for " + std::to_string(ids.size()) + " items"};
    }

    QuantMethod method = quant_method_from_string(cfg.get_str("quant.method"));
    Codebook cb = fit_codebook(raw, method, k, C, seed);
    CodeMap codes = assign_codes(raw, cb);
    write_codes_file(paths.codes(), codes, h);
    write_codebook(paths.codebook(), cb, h);
    return {false, "quantize: " + to_string(method) + " " + std::to_string(m) + "x" +
                       std::to_string(k) + "x" + std::to_string(C) + " over " +
                       std::to_string(raw.size()) + " items"};
}

// ---------------------------------------------------------------------------
// data assembly
// ---------------------------------------------------------------------------

LoadedData load_data(const Config& cfg, const Paths& paths) {
    require_artifact(paths.interactions_norm(), "ingest");
    require_artifact(paths.emb_cache(), "embed");
    require_artifact(paths.pca(), "embed");
    require_artifact(paths.codes(), "quantize");

    LoadedData data;
    std::vector<Interaction> interactions = read_interactions(paths.interactions_norm());
    data.splits = build_splits(interactions, cfg.get_int("corpus.max_len"));

    EmbeddingMap raw = read_embedding_cache(paths.emb_cache());
    PcaTransform pca = read_pca(paths.pca());
    CodeMap codes = read_codes_file(paths.codes());

    data.tensors.codes.reserve(data.splits.item_vocab.size());
    data.tensors.text.reserve(data.splits.item_vocab.size());
    for (const auto& id : data.splits.item_vocab) {
        auto ct = codes.find(id);
        if (ct == codes.end()) throw Error("no codes for item " + id);
        auto emb = raw.find(id);
        if (emb == raw.end()) throw Error("no embeddings for item " + id);
        data.tensors.codes.push_back(ct->second.codes);
        data.tensors.text.push_back(project(emb->second, pca));
    }
    return data;
}

ModelConfig model_config_from(const Config& cfg, int m_views, int vocab_size) {
    ModelConfig mc;
    mc.d = cfg.get_int("model.d");
    mc.heads = cfg.get_int("model.heads");
    mc.sfm_layers = cfg.get_int("model.sfm_layers");
    mc.backbone_layers = cfg.get_int("model.backbone_layers");
    mc.ffn = cfg.get_int("model.ffn");
    mc.m = m_views;
    mc.k = cfg.get_int("quant.k");
    mc.C = cfg.get_int("quant.C");
    mc.max_seq_len = cfg.get_int("corpus.max_len");
    mc.vocab_size = vocab_size;
    mc.dropout = cfg.get_double("train.dropout");
    mc.init_seed = cfg.get_u64("seed");
    mc.ablation = AblationFlags::parse(cfg.get_str("ablation"));
    return mc;
}

LossConfig loss_config_from(const Config& cfg) {
    LossConfig lc;
    lc.tau = cfg.get_double("loss.tau");
    lc.rho = cfg.get_double("loss.rho");
    lc.alpha = cfg.get_double("loss.alpha");
    lc.beta = cfg.get_double("loss.beta");
    lc.in_batch_negatives = cfg.get_str("loss.negatives") != "uniform";
    lc.uniform_k = cfg.get_int("loss.uniform_k");
    return lc;
}

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig tc;
    tc.lr = cfg.get_double("train.lr");
    tc.batch_size = cfg.get_int("train.batch");
    tc.max_epochs = cfg.get_int("train.max_epochs");
    tc.patience = cfg.get_int("train.patience");
    tc.seed = cfg.get_u64("seed");
    tc.loss = loss_config_from(cfg);
    AblationFlags ablation = AblationFlags::parse(cfg.get_str("ablation"));
    tc.no_mcm = ablation.no_mcm;
    tc.no_msa = ablation.no_msa;
    tc.exclude_seen = cfg.get_bool("eval.exclude_seen");
    return tc;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

void write_metrics_jsonl(const fs::path& path, uint64_t h, const TrainResult& result,
                         const std::string& ablation) {
    std::ofstream out(path, std::ios::trunc);
    out << text_header("metrics", h) << "\n";
    for (const auto& em : result.history) {
        json rec;
        rec["epoch"] = em.epoch;
        rec["train_loss"] = em.train_loss;
        rec["val_ndcg10"] = em.val_ndcg10;
        rec["improved"] = em.improved;
        rec["ablation"] = ablation;
        out << rec.dump() << "\n";
    }
}

int derive_views(const LoadedData& data, const Config& cfg) {
    int n_codes = static_cast<int>(data.tensors.codes.front().size());
    int k = cfg.get_int("quant.k");
    if (n_codes % k != 0) throw Error("codes length is not a multiple of quant.k");
    int m = n_codes / k;
    if (data.tensors.text.front().rows() != m)
        throw Error("attribute views in embeddings and codes disagree");
    return m;
}

}  // namespace

StageStatus run_train(const Config& cfg, const Paths& paths, const TrainHooks& hooks) {
    uint64_t h = train_hash(cfg, paths);
    fs::path run = paths.run_dir(h);
    if (outputs_match(h, {run / "best.ckpt", run / "last.ckpt"}))
        return {true, "train: run " + run.filename().string() + " up to date"};

    LoadedData data = load_data(cfg, paths);
    int m = derive_views(data, cfg);
    CcfrecModel model(model_config_from(cfg, m, static_cast<int>(data.splits.item_vocab.size())));
    TrainConfig tc = train_config_from(cfg);

    TrainResult result = train(model, data.splits, data.tensors, tc, hooks);

    fs::create_directories(run);
    save_checkpoint(run / "best.ckpt", result.best, h);
    Checkpoint last = snapshot_params(model.params(), result.best.adam_step, result.epochs_run,
                                      result.best.best_val_ndcg10);
    save_checkpoint(run / "last.ckpt", last, h);
    write_metrics_jsonl(run / "metrics.jsonl", h, result, cfg.get_str("ablation"));
    Config snapshot = cfg;
    snapshot.save(run / "config.txt");

    std::string msg = "train: " + std::to_string(result.epochs_run) + " epochs, best val NDCG@10 " +
                      std::to_string(result.best.best_val_ndcg10) + " (epoch " +
                      std::to_string(result.best.epoch) + ") -> " + run.string();
    if (result.diverged) msg += " [diverged: stopped at last good checkpoint]";
    return {false, msg};
}

// ---------------------------------------------------------------------------
// model reload / eval / export / finetune
// ---------------------------------------------------------------------------

std::unique_ptr<CcfrecModel> load_trained_model(const Config& cfg, const Paths& paths,
                                                const LoadedData& data, bool finetuned) {
    uint64_t h = train_hash(cfg, paths);
    fs::path run = paths.run_dir(h, finetuned);
    fs::path ckpt_path = run / "best.ckpt";
    require_artifact(ckpt_path, finetuned ? "finetune-ids" : "train");

    int m = derive_views(data, cfg);
    auto model = std::make_unique<CcfrecModel>(
        model_config_from(cfg, m, static_cast<int>(data.splits.item_vocab.size())));
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (ckpt.values.count("id.table")) model->ensure_id_table();
    restore_params(ckpt, model->params());
    return model;
}

MetricReport run_eval(const Config& cfg, const Paths& paths, const std::string& split,
                      std::ostream& out, bool finetuned) {
    LoadedData data = load_data(cfg, paths);
    auto model = load_trained_model(cfg, paths, data, finetuned);

    const std::vector<SplitExample>* examples = nullptr;
    if (split == "test")
        examples = &data.splits.test;
    else if (split == "valid")
        examples = &data.splits.valid;
    else
        throw ConfigError("eval split must be 'test' or 'valid'");

    EvalOptions opts;
    opts.exclude_seen = cfg.get_bool("eval.exclude_seen");
    MetricReport report = evaluate_split(*model, data.tensors, *examples, opts);

    uint64_t h = train_hash(cfg, paths);
    fs::path run = paths.run_dir(h, finetuned);
    std::ofstream log(run / "eval.jsonl", std::ios::app);
    for (int k : {5, 10}) {
        json rec;
        rec["split"] = split;
        rec["K"] = k;
        rec["recall"] = k == 5 ? report.recall5 : report.recall10;
        rec["ndcg"] = k == 5 ? report.ndcg5 : report.ndcg10;
        rec["users"] = report.users;
        rec["ablation"] = cfg.get_str("ablation");
        out << rec.dump() << "\n";
        log << rec.dump() << "\n";
    }
    return report;
}

StageStatus run_export_reps(const Config& cfg, const Paths& paths) {
    uint64_t h = train_hash(cfg, paths);
    if (outputs_match(h, {paths.reps()})) return {true, "export-reps: output up to date"};
    LoadedData data = load_data(cfg, paths);
    auto model = load_trained_model(cfg, paths, data);
    Mat cache = build_rep_cache(*model, data.tensors);
    write_rep_cache(paths.reps(), cache, data.splits.item_vocab, h);
    return {false, "export-reps: " + std::to_string(cache.rows()) + " x " +
                       std::to_string(cache.cols()) + " -> " + paths.reps().string()};
}

StageStatus run_finetune_ids(const Config& cfg, const Paths& paths) {
    uint64_t h = train_hash(cfg, paths);
    fs::path run = paths.run_dir(h, true);
    if (outputs_match(h, {run / "best.ckpt"}))
        return {true, "finetune-ids: run up to date"};

    LoadedData data = load_data(cfg, paths);
    auto model = load_trained_model(cfg, paths, data);
    TrainConfig tc = train_config_from(cfg);
    TrainResult result = finetune_with_ids(*model, data.splits, data.tensors, tc);

    fs::create_directories(run);
    save_checkpoint(run / "best.ckpt", result.best, h);
    write_metrics_jsonl(run / "metrics.jsonl", h, result, cfg.get_str("ablation"));
    return {false, "finetune-ids: " + std::to_string(result.epochs_run) +
                       " epochs, best val NDCG@10 " +
                       std::to_string(result.best.best_val_ndcg10)};
}

}  // namespace ccfrec::pipeline
