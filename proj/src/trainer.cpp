#include "ccfrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ccfrec {

namespace {

// Deduplicated item set for a batch plus the local index of every occurrence.
struct BatchIndex {
    std::vector<int> unique_items;              // sorted vocab indices
    std::map<int, int> local;                   // vocab index -> row in unique_items
    std::vector<std::vector<int>> prefix_local; // per example
    std::vector<int> target_local;              // per example
};

BatchIndex index_batch(const std::vector<SplitExample>& batch,
                       const std::vector<int>& extra_items) {
    BatchIndex bi;
    std::set<int> uniq;
    for (const auto& ex : batch) {
        uniq.insert(ex.prefix.begin(), ex.prefix.end());
        uniq.insert(ex.target);
    }
    uniq.insert(extra_items.begin(), extra_items.end());
    bi.unique_items.assign(uniq.begin(), uniq.end());
    for (std::size_t i = 0; i < bi.unique_items.size(); ++i)
        bi.local[bi.unique_items[i]] = static_cast<int>(i);
    for (const auto& ex : batch) {
        std::vector<int> pl;
        pl.reserve(ex.prefix.size());
        for (int it : ex.prefix) pl.push_back(bi.local.at(it));
        bi.prefix_local.push_back(std::move(pl));
        bi.target_local.push_back(bi.local.at(ex.target));
    }
    return bi;
}

// Backbone forward for every example over rows of `reps`; returns the B x d
// matrix of user preference vectors.
Var sequence_reps(CcfrecModel& model, Tape& t, Var reps, const BatchIndex& bi,
                  const std::vector<SplitExample>& batch) {
    std::vector<Var> rows;
    rows.reserve(batch.size());
    for (std::size_t e = 0; e < batch.size(); ++e) {
        Var seq = t.pick_rows(reps, bi.prefix_local[e]);
        if (model.id_table()) seq = add_id_embeddings(t, seq, *model.id_table(), batch[e].prefix);
        rows.push_back(model.backbone().forward(t, seq).r);
    }
    return t.vstack(rows);
}

}  // namespace

double train_step(CcfrecModel& model, const ItemTensors& items,
                  const std::vector<SplitExample>& batch, const TrainConfig& cfg,
                  ad::Adam& adam, std::mt19937_64& dropout_rng, std::mt19937_64& mask_rng,
                  std::mt19937_64& negative_rng) {
    if (batch.empty()) throw Error("train_step: empty batch");
    const bool use_mcm = !cfg.no_mcm && cfg.loss.alpha != 0.0;
    const bool use_msa = !cfg.no_msa && cfg.loss.beta != 0.0 && batch.size() >= 2;
    const int n_codes = model.config().n_codes();
    const int C = model.config().C;

    // uniform negative sampling happens before dedup so the sampled items get
    // fused representations too
    std::vector<std::vector<int>> sampled_negatives(batch.size());
    std::vector<int> extra;
    if (!cfg.loss.in_batch_negatives) {
        std::uniform_int_distribution<int> pick(0, items.size() - 1);
        for (std::size_t e = 0; e < batch.size(); ++e) {
            for (int j = 0; j < cfg.loss.uniform_k; ++j) {
                int v = pick(negative_rng);
                while (v == batch[e].target) v = pick(negative_rng);
                sampled_negatives[e].push_back(v);
                extra.push_back(v);
            }
        }
    }
    BatchIndex bi = index_batch(batch, extra);

    Tape t(true, &dropout_rng);

    // fused representations for the deduplicated item set
    std::vector<Var> fused;
    fused.reserve(bi.unique_items.size());
    for (int item : bi.unique_items) fused.push_back(model.fuse(t, items, item).e_tilde);
    Var reps = t.vstack(fused);

    Var user_reps = sequence_reps(model, t, reps, bi, batch);

    // recommendation loss
    Var ce = [&] {
        if (cfg.loss.in_batch_negatives) {
            Var candidates = t.pick_rows(reps, bi.target_local);
            std::vector<int> targets(batch.size());
            std::iota(targets.begin(), targets.end(), 0);
            return loss_ce_batch(t, user_reps, candidates, std::move(targets), cfg.loss.tau);
        }
        std::vector<Var> losses;
        losses.reserve(batch.size());
        for (std::size_t e = 0; e < batch.size(); ++e) {
            std::vector<int> cand_local = {bi.target_local[e]};
            for (int v : sampled_negatives[e]) cand_local.push_back(bi.local.at(v));
            Var cand = t.pick_rows(reps, cand_local);
            Var row = t.pick_rows(user_reps, {static_cast<int>(e)});
            losses.push_back(loss_ce_batch(t, row, cand, {0}, cfg.loss.tau));
        }
        Var sum = losses.front();
        for (std::size_t i = 1; i < losses.size(); ++i) sum = t.add(sum, losses[i]);
        return t.scale(sum, 1.0 / static_cast<double>(losses.size()));
    }();

    // masked branch shared by MCM and MSA: one mask draw per unique item
    Var mcm, msa;
    if (use_mcm || use_msa) {
        std::vector<Var> masked_fused;
        std::vector<McmGroup> groups(static_cast<std::size_t>(n_codes));
        std::vector<std::vector<Var>> group_rows(static_cast<std::size_t>(n_codes));
        masked_fused.reserve(bi.unique_items.size());
        for (int item : bi.unique_items) {
            const auto& codes = items.codes[static_cast<std::size_t>(item)];
            MaskResult mr = mask_codes(codes, cfg.loss.rho, C, mask_rng);
            FuseResult fr = model.fuse_codes(t, mr.codes, items.text[static_cast<std::size_t>(item)]);
            masked_fused.push_back(fr.e_tilde);
            if (use_mcm) {
                for (int pos : mr.mask_set) {
                    group_rows[static_cast<std::size_t>(pos)].push_back(
                        t.pick_rows(fr.states, {pos}));
                    groups[static_cast<std::size_t>(pos)].true_codes.push_back(
                        codes[static_cast<std::size_t>(pos)]);
                }
            }
        }
        if (use_mcm) {
            std::vector<McmGroup> nonempty;
            for (int pos = 0; pos < n_codes; ++pos) {
                auto& g = groups[static_cast<std::size_t>(pos)];
                if (g.true_codes.empty()) continue;
                g.states = t.vstack(group_rows[static_cast<std::size_t>(pos)]);
                g.table = &model.sfm().code_table(pos);
                nonempty.push_back(std::move(g));
            }
            mcm = loss_mcm(t, nonempty, C, cfg.loss.tau);
        }
        if (use_msa) {
            Var masked_reps = t.vstack(masked_fused);
            Var augmented = sequence_reps(model, t, masked_reps, bi, batch);
            msa = loss_msa(t, user_reps, augmented, cfg.loss.tau);
        }
    }

    Var total = loss_total(t, ce, use_mcm ? &mcm : nullptr, use_msa ? &msa : nullptr,
                           cfg.loss.alpha, cfg.loss.beta);
    double value = t.scalar(total);
    if (!std::isfinite(value)) return value;  // caller aborts, no update
    t.backward(total);
    adam.step(model.params());
    return value;
}

TrainResult train(CcfrecModel& model, const SplitDataset& splits, const ItemTensors& items,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
    if (splits.train.empty()) throw Error("train: no training examples");
    TrainResult result;
    ad::Adam adam({cfg.lr, 0.9, 0.999, 1e-8});
    std::mt19937_64 shuffle_rng = seeded_rng(cfg.seed, "shuffle");
    std::mt19937_64 dropout_rng = seeded_rng(cfg.seed, "dropout");
    std::mt19937_64 mask_rng = seeded_rng(cfg.seed, "mask");
    std::mt19937_64 negative_rng = seeded_rng(cfg.seed, "negatives");

    double best_val = -std::numeric_limits<double>::infinity();
    int bad_epochs = 0;
    int step = 0;
    result.best = snapshot_params(model.params(), adam.step_count(), 0, 0.0);

    std::vector<std::size_t> order(splits.train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<SplitExample> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
                batch.push_back(splits.train[order[i]]);
            double loss;
            try {
                loss = train_step(model, items, batch, cfg, adam, dropout_rng, mask_rng,
                                  negative_rng);
            } catch (const NonFiniteError&) {
                loss = std::numeric_limits<double>::quiet_NaN();
            }
            if (!std::isfinite(loss)) {
                // divergence: stop at the last good checkpoint
                result.diverged = true;
                result.epochs_run = epoch;
                restore_params(result.best, model.params());
                return result;
            }
            loss_sum += loss;
            ++batches;
            ++step;
            if (hooks.on_step) hooks.on_step(step, loss);
        }

        EvalOptions eopts;
        eopts.exclude_seen = cfg.exclude_seen;
        double val = evaluate_split(model, items, splits.valid, eopts).ndcg10;
        if (hooks.val_metric_override) val = hooks.val_metric_override(epoch, val);

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        em.val_ndcg10 = val;
        em.improved = val > best_val;
        result.history.push_back(em);
        result.epochs_run = epoch;

        if (em.improved) {
            best_val = val;
            bad_epochs = 0;
            result.best = snapshot_params(model.params(), adam.step_count(), epoch, best_val);
        } else if (++bad_epochs >= cfg.patience) {
            break;
        }
    }
    restore_params(result.best, model.params());
    return result;
}

double mean_ce_eval(CcfrecModel& model, const ItemTensors& items,
                    const std::vector<SplitExample>& examples, const TrainConfig& cfg) {
    if (examples.empty()) return 0.0;
    double total = 0.0;
    long count = 0;
    for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
        std::vector<SplitExample> batch(
            examples.begin() + static_cast<long>(start),
            examples.begin() + static_cast<long>(std::min(examples.size(),
                                                          start + cfg.batch_size)));
        BatchIndex bi = index_batch(batch, {});
        Tape t(false);
        std::vector<Var> fused;
        for (int item : bi.unique_items) fused.push_back(model.fuse(t, items, item).e_tilde);
        Var reps = t.vstack(fused);
        Var user_reps = sequence_reps(model, t, reps, bi, batch);
        Var candidates = t.pick_rows(reps, bi.target_local);
        std::vector<int> targets(batch.size());
        std::iota(targets.begin(), targets.end(), 0);
        Var ce = loss_ce_batch(t, user_reps, candidates, std::move(targets), cfg.loss.tau);
        total += t.scalar(ce) * static_cast<double>(batch.size());
        count += static_cast<long>(batch.size());
    }
    return total / static_cast<double>(count);
}

TrainResult finetune_with_ids(CcfrecModel& model, const SplitDataset& splits,
                              const ItemTensors& items, TrainConfig cfg,
                              const TrainHooks& hooks) {
    Param& id_table = model.ensure_id_table();
    for (Param* p : model.params().all()) p->trainable = (p == &id_table);
    cfg.no_mcm = true;
    cfg.no_msa = true;
    cfg.loss.alpha = 0.0;
    cfg.loss.beta = 0.0;
    return train(model, splits, items, cfg, hooks);
}

std::vector<double> mcm_probe_accuracy(const CcfrecModel& model, const ItemTensors& items,
                                       const std::vector<int>& probe_items) {
    const int n_codes = model.config().n_codes();
    const int C = model.config().C;
    std::vector<double> accuracy(static_cast<std::size_t>(n_codes), 0.0);
    if (probe_items.empty()) return accuracy;
    for (int item : probe_items) {
        const auto& codes = items.codes[static_cast<std::size_t>(item)];
        for (int pos = 0; pos < n_codes; ++pos) {
            std::vector<int> masked = codes;
            masked[static_cast<std::size_t>(pos)] = C;  // force MASK
            Tape t(false);
            FuseResult fr = model.fuse_codes(t, masked, items.text[static_cast<std::size_t>(item)]);
            Eigen::RowVectorXd state = t.value(fr.states).row(pos);
            const Mat& table = model.sfm().code_table(pos).value;
            int best = 0;
            double best_score = -std::numeric_limits<double>::infinity();
            double sn = state.norm();
            for (int c = 0; c < C; ++c) {
                double tn = table.row(c).norm();
                double score = (sn == 0.0 || tn == 0.0)
                                   ? 0.0
                                   : state.dot(table.row(c)) / (sn * tn);
                if (score > best_score) {
                    best_score = score;
                    best = c;
                }
            }
            if (best == codes[static_cast<std::size_t>(pos)])
                accuracy[static_cast<std::size_t>(pos)] += 1.0;
        }
    }
    for (double& a : accuracy) a /= static_cast<double>(probe_items.size());
    return accuracy;
}

}  // namespace ccfrec
