#pragma once

// Joint training of the semantic-fusion module and the backbone with the
// combined objective, NDCG@10 early stopping on the validation split, and the
// frozen-model ID fine-tuning stage.

#include <functional>

#include "ccfrec/evaluator.hpp"
#include "ccfrec/io.hpp"
#include "ccfrec/model.hpp"
#include "ccfrec/objectives.hpp"

namespace ccfrec {

struct TrainConfig {
    double lr = 0.001;
    int batch_size = 256;
    int max_epochs = 200;
    int patience = 10;
    uint64_t seed = 42;
    LossConfig loss;
    bool no_mcm = false;  // drop the masked-code objective (alpha ignored)
    bool no_msa = false;  // drop the masked-sequence objective (beta ignored)
    bool exclude_seen = true;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double val_ndcg10 = 0.0;
    bool improved = false;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochMetrics> history;
    int epochs_run = 0;
    bool diverged = false;
};

struct TrainHooks {
    // Replaces the computed validation metric (test scripting of the early
    // stopping rule). Receives (epoch, computed value).
    std::function<double(int, double)> val_metric_override;
    // Called after every optimizer step with the batch loss.
    std::function<void(int step, double loss)> on_step;
};

// One optimizer step over a batch of examples. Returns the batch loss.
// Exposed for tests; train() drives it.
double train_step(CcfrecModel& model, const ItemTensors& items,
                  const std::vector<SplitExample>& batch, const TrainConfig& cfg,
                  ad::Adam& adam, std::mt19937_64& dropout_rng, std::mt19937_64& mask_rng,
                  std::mt19937_64& negative_rng);

TrainResult train(CcfrecModel& model, const SplitDataset& splits, const ItemTensors& items,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

// Mean recommendation cross-entropy over examples in eval mode (no dropout,
// in-batch candidate sets over consecutive example blocks).
double mean_ce_eval(CcfrecModel& model, const ItemTensors& items,
                    const std::vector<SplitExample>& examples, const TrainConfig& cfg);

// Freezes every parameter except a zero-initialized |V| x d ID table, then
// trains with the recommendation objective only. The returned checkpoint
// holds the fine-tuned table; all other tensors are bit-identical.
TrainResult finetune_with_ids(CcfrecModel& model, const SplitDataset& splits,
                              const ItemTensors& items, TrainConfig cfg,
                              const TrainHooks& hooks = {});

// Masked-code prediction accuracy per code position: for each probed item and
// position, the position is forced to MASK, the SFM runs in eval mode, and
// the nearest (cosine) non-MASK row of that position's table is the
// prediction. Returns one accuracy per code position.
std::vector<double> mcm_probe_accuracy(const CcfrecModel& model, const ItemTensors& items,
                                       const std::vector<int>& probe_items);

}  // namespace ccfrec
