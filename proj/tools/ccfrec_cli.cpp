// ccfrec command-line pipeline:
//   synth -> ingest -> embed -> quantize -> train -> eval
// plus export-reps and finetune-ids. Stages are idempotent: outputs carry a
// config hash and a stage whose outputs already match is skipped.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ccfrec/pipeline.hpp"

namespace {

using ccfrec::Config;
using ccfrec::pipeline::Paths;

struct CommonOpts {
    std::string config_path;
    std::string workdir = "work";
    // overrides; empty/unset = keep config value
    std::string seed, quant_k, codebook_size, alpha, beta, mask_ratio, temperature, ablation;
    bool pq = false;
    bool rq = false;
    bool no_exclude_seen = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "config file (key = value lines)");
    cmd->add_option("--workdir", o.workdir, "artifact directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "global RNG seed");
    cmd->add_flag("--pq", o.pq, "use product quantization");
    cmd->add_flag("--rq", o.rq, "use residual quantization");
    cmd->add_option("--k", o.quant_k, "codes per attribute view");
    cmd->add_option("--codebook-size", o.codebook_size, "codebook size C");
    cmd->add_option("--alpha", o.alpha, "masked-code loss weight");
    cmd->add_option("--beta", o.beta, "masked-sequence loss weight");
    cmd->add_option("--mask-ratio", o.mask_ratio, "code mask ratio rho");
    cmd->add_option("--temperature", o.temperature, "softmax temperature tau");
    cmd->add_option("--ablation", o.ablation,
                    "comma-separated ablations (no_mcm,no_msa,no_text,random_code,"
                    "global_emb,no_cross_attention,add_item_id)");
    cmd->add_flag("--no-exclude-seen", o.no_exclude_seen,
                  "rank against the whole item set, including seen items");
}

Config build_config(const CommonOpts& o) {
    Config cfg = o.config_path.empty() ? Config::defaults() : Config::load(o.config_path);
    if (!o.seed.empty()) cfg.set("seed", o.seed);
    if (o.pq && o.rq) throw ccfrec::ConfigError("--pq and --rq are mutually exclusive");
    if (o.pq) cfg.set("quant.method", "pq");
    if (o.rq) cfg.set("quant.method", "rq");
    if (!o.quant_k.empty()) cfg.set("quant.k", o.quant_k);
    if (!o.codebook_size.empty()) cfg.set("quant.C", o.codebook_size);
    if (!o.alpha.empty()) cfg.set("loss.alpha", o.alpha);
    if (!o.beta.empty()) cfg.set("loss.beta", o.beta);
    if (!o.mask_ratio.empty()) cfg.set("loss.rho", o.mask_ratio);
    if (!o.temperature.empty()) cfg.set("loss.tau", o.temperature);
    if (!o.ablation.empty()) cfg.set("ablation", o.ablation);
    if (o.no_exclude_seen) cfg.set("eval.exclude_seen", "false");
    return cfg;
}

void report(const ccfrec::pipeline::StageStatus& st) {
    std::cout << (st.skipped ? "[skip] " : "[done] ") << st.message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccfrec: semantic-code sequential recommender pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string items_in, interactions_in, eval_split = "test";
    bool eval_finetuned = false;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic topic corpus");
    add_common(synth, opts);
    CLI::App* ingest = app.add_subcommand("ingest", "filter and normalize raw item/interaction files");
    add_common(ingest, opts);
    ingest->add_option("--items", items_in, "raw items.jsonl (default: workdir/items.jsonl)");
    ingest->add_option("--interactions", interactions_in,
                       "raw interactions.tsv (default: workdir/interactions.tsv)");
    CLI::App* embed = app.add_subcommand("embed", "encode attributes and fit the PCA projection");
    add_common(embed, opts);
    CLI::App* quantize = app.add_subcommand("quantize", "fit codebooks and assign semantic codes");
    add_common(quantize, opts);
    CLI::App* train = app.add_subcommand("train", "train the model with early stopping");
    add_common(train, opts);
    CLI::App* eval = app.add_subcommand("eval", "full-ranking Recall@K / NDCG@K");
    add_common(eval, opts);
    eval->add_option("--split", eval_split, "test or valid")->capture_default_str();
    eval->add_flag("--finetuned", eval_finetuned, "evaluate the ID-finetuned run");
    CLI::App* export_reps = app.add_subcommand("export-reps", "write the fused-representation cache");
    add_common(export_reps, opts);
    CLI::App* finetune = app.add_subcommand("finetune-ids",
                                            "fine-tune an item-ID table on the frozen model");
    add_common(finetune, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = build_config(opts);
        Paths paths{opts.workdir};
        if (synth->parsed()) {
            report(ccfrec::pipeline::run_synth(cfg, paths));
        } else if (ingest->parsed()) {
            ccfrec::fs::path ip = items_in.empty() ? paths.items_raw() : ccfrec::fs::path(items_in);
            ccfrec::fs::path xp = interactions_in.empty() ? paths.interactions_raw()
                                                          : ccfrec::fs::path(interactions_in);
            report(ccfrec::pipeline::run_ingest(cfg, paths, ip, xp));
        } else if (embed->parsed()) {
            report(ccfrec::pipeline::run_embed(cfg, paths));
        } else if (quantize->parsed()) {
            report(ccfrec::pipeline::run_quantize(cfg, paths));
        } else if (train->parsed()) {
            report(ccfrec::pipeline::run_train(cfg, paths));
        } else if (eval->parsed()) {
            ccfrec::pipeline::run_eval(cfg, paths, eval_split, std::cout, eval_finetuned);
        } else if (export_reps->parsed()) {
            report(ccfrec::pipeline::run_export_reps(cfg, paths));
        } else if (finetune->parsed()) {
            report(ccfrec::pipeline::run_finetune_ids(cfg, paths));
        }
    } catch (const ccfrec::MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
