#include "ccfrec/evaluator.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>

namespace ccfrec {

Mat build_rep_cache(const CcfrecModel& model, const ItemTensors& items) {
    if (items.size() == 0) throw Error("build_rep_cache: no items");
    Mat cache(items.size(), model.config().d);
    for (int v = 0; v < items.size(); ++v) {
        if (static_cast<int>(items.codes[static_cast<std::size_t>(v)].size()) !=
            model.config().n_codes())
            throw Error("build_rep_cache: missing codes for item " + std::to_string(v));
        cache.row(v) = model.fuse_eval(items, v);
    }
    return cache;
}

namespace {

// cosine scores of r against every cache row; zero rows score 0
Eigen::VectorXd cosine_scores(const Eigen::RowVectorXd& r, const Mat& cache) {
    double rn = r.norm();
    if (rn == 0.0) throw DegenerateRepError("rank_full");
    Eigen::VectorXd scores = cache * r.transpose() / rn;
    for (long v = 0; v < cache.rows(); ++v) {
        double cn = cache.row(v).norm();
        scores(v) = cn == 0.0 ? 0.0 : scores(v) / cn;
    }
    return scores;
}

}  // namespace

std::vector<int> rank_full(const Eigen::RowVectorXd& r, const Mat& cache,
                           const std::set<int>& exclude) {
    Eigen::VectorXd scores = cosine_scores(r, cache);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(cache.rows()));
    for (int v = 0; v < cache.rows(); ++v)
        if (!exclude.count(v)) order.push_back(v);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores(a) != scores(b)) return scores(a) > scores(b);
        return a < b;
    });
    return order;
}

int target_rank(const Eigen::RowVectorXd& r, const Mat& cache, const std::set<int>& exclude,
                int target) {
    if (exclude.count(target)) return INT_MAX;
    Eigen::VectorXd scores = cosine_scores(r, cache);
    const double ts = scores(target);
    int rank = 1;
    for (int v = 0; v < cache.rows(); ++v) {
        if (v == target || exclude.count(v)) continue;
        if (scores(v) > ts || (scores(v) == ts && v < target)) ++rank;
    }
    return rank;
}

double recall_at_k(const std::vector<std::vector<int>>& rank_lists,
                   const std::vector<int>& targets, int k) {
    if (rank_lists.size() != targets.size()) throw Error("recall_at_k: size mismatch");
    if (rank_lists.empty()) return 0.0;
    int hits = 0;
    for (std::size_t u = 0; u < rank_lists.size(); ++u) {
        const auto& list = rank_lists[u];
        long take = std::min<long>(k, static_cast<long>(list.size()));
        for (long i = 0; i < take; ++i)
            if (list[static_cast<std::size_t>(i)] == targets[u]) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(rank_lists.size());
}

double ndcg_at_k(const std::vector<std::vector<int>>& rank_lists,
                 const std::vector<int>& targets, int k) {
    if (rank_lists.size() != targets.size()) throw Error("ndcg_at_k: size mismatch");
    if (rank_lists.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t u = 0; u < rank_lists.size(); ++u) {
        const auto& list = rank_lists[u];
        long take = std::min<long>(k, static_cast<long>(list.size()));
        for (long i = 0; i < take; ++i)
            if (list[static_cast<std::size_t>(i)] == targets[u]) {
                total += 1.0 / std::log2(static_cast<double>(i) + 2.0);
                break;
            }
    }
    return total / static_cast<double>(rank_lists.size());
}

double recall_from_ranks(const std::vector<int>& ranks, int k) {
    if (ranks.empty()) return 0.0;
    int hits = 0;
    for (int r : ranks)
        if (r <= k) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_from_ranks(const std::vector<int>& ranks, int k) {
    if (ranks.empty()) return 0.0;
    double total = 0.0;
    for (int r : ranks)
        if (r <= k) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    return total / static_cast<double>(ranks.size());
}

Eigen::RowVectorXd user_preference(const CcfrecModel& model, const Mat& cache,
                                   const std::vector<int>& prefix, Param* id_table) {
    Tape t(false);
    std::vector<int> idx(prefix.begin(), prefix.end());
    Var reps = t.pick_rows(t.constant(cache), idx);
    if (id_table) reps = add_id_embeddings(t, reps, *id_table, prefix);
    BackboneResult out = model.backbone().forward(t, reps);
    return t.value(out.r).row(0);
}

std::vector<int> split_target_ranks(const CcfrecModel& model, const Mat& cache,
                                    const std::vector<SplitExample>& examples,
                                    const EvalOptions& opts) {
    std::vector<int> ranks;
    ranks.reserve(examples.size());
    Param* id_table = const_cast<CcfrecModel&>(model).id_table();
    for (const auto& ex : examples) {
        Eigen::RowVectorXd r = user_preference(model, cache, ex.prefix, id_table);
        std::set<int> exclude;
        if (opts.exclude_seen) exclude.insert(ex.prefix.begin(), ex.prefix.end());
        ranks.push_back(target_rank(r, cache, exclude, ex.target));
    }
    return ranks;
}

MetricReport evaluate_split(const CcfrecModel& model, const ItemTensors& items,
                            const std::vector<SplitExample>& examples,
                            const EvalOptions& opts) {
    Mat cache = build_rep_cache(model, items);
    std::vector<int> ranks = split_target_ranks(model, cache, examples, opts);
    MetricReport rep;
    rep.users = static_cast<int>(examples.size());
    rep.recall5 = recall_from_ranks(ranks, 5);
    rep.recall10 = recall_from_ranks(ranks, 10);
    rep.ndcg5 = ndcg_from_ranks(ranks, 5);
    rep.ndcg10 = ndcg_from_ranks(ranks, 10);
    return rep;
}

}  // namespace ccfrec
