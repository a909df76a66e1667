#pragma once

// Full-ranking evaluation: score the user preference vector against every
// item representation, exclude already-seen items, and report Recall@K and
// NDCG@K under the leave-one-out protocol.

#include <set>

#include "ccfrec/corpus.hpp"
#include "ccfrec/model.hpp"

namespace ccfrec {

struct MetricReport {
    double recall5 = 0.0;
    double recall10 = 0.0;
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    int users = 0;
};

// One eval-mode SFM pass per item; row v is the fused representation of
// vocab item v.
Mat build_rep_cache(const CcfrecModel& model, const ItemTensors& items);

// Items ordered by descending cosine similarity to r; ties broken by
// ascending item index; excluded items removed before ranking.
std::vector<int> rank_full(const Eigen::RowVectorXd& r, const Mat& cache,
                           const std::set<int>& exclude);

// 1-based rank of `target` under the rank_full ordering, without building the
// list; returns INT_MAX when the target is excluded.
int target_rank(const Eigen::RowVectorXd& r, const Mat& cache, const std::set<int>& exclude,
                int target);

double recall_at_k(const std::vector<std::vector<int>>& rank_lists,
                   const std::vector<int>& targets, int k);
double ndcg_at_k(const std::vector<std::vector<int>>& rank_lists,
                 const std::vector<int>& targets, int k);

// Same metrics from precomputed 1-based target ranks (INT_MAX = miss).
double recall_from_ranks(const std::vector<int>& ranks, int k);
double ndcg_from_ranks(const std::vector<int>& ranks, int k);

struct EvalOptions {
    bool exclude_seen = true;  // drop the example's history from the candidates
};

// Backbone forward over cached representations; returns r for one prefix.
Eigen::RowVectorXd user_preference(const CcfrecModel& model, const Mat& cache,
                                   const std::vector<int>& prefix, Param* id_table);

MetricReport evaluate_split(const CcfrecModel& model, const ItemTensors& items,
                            const std::vector<SplitExample>& examples,
                            const EvalOptions& opts = {});

// Target ranks for every example, reusing one rep cache (test support and
// cache-equivalence checks).
std::vector<int> split_target_ranks(const CcfrecModel& model, const Mat& cache,
                                    const std::vector<SplitExample>& examples,
                                    const EvalOptions& opts);

}  // namespace ccfrec
