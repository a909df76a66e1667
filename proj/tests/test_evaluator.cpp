#include <doctest.h>

#include <algorithm>

#include "ccfrec/evaluator.hpp"

using namespace ccfrec;

namespace {

Mat random_mat(long r, long c, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat m(r, c);
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

// brute-force reimplementation of full ranking + metrics over raw scores
struct BruteForce {
    static std::vector<int> rank(const Eigen::VectorXd& scores, const std::set<int>& exclude) {
        std::vector<std::pair<double, int>> pairs;
        for (int v = 0; v < scores.size(); ++v)
            if (!exclude.count(v)) pairs.push_back({scores(v), v});
        std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::vector<int> out;
        for (auto& [s, v] : pairs) out.push_back(v);
        return out;
    }
    static double recall(const std::vector<std::vector<int>>& lists,
                         const std::vector<int>& targets, int k) {
        double hits = 0;
        for (std::size_t u = 0; u < lists.size(); ++u) {
            for (int i = 0; i < k && i < static_cast<int>(lists[u].size()); ++i)
                if (lists[u][static_cast<std::size_t>(i)] == targets[u]) hits += 1;
        }
        return hits / static_cast<double>(lists.size());
    }
    static double ndcg(const std::vector<std::vector<int>>& lists,
                       const std::vector<int>& targets, int k) {
        double total = 0;
        for (std::size_t u = 0; u < lists.size(); ++u) {
            for (int i = 0; i < k && i < static_cast<int>(lists[u].size()); ++i)
                if (lists[u][static_cast<std::size_t>(i)] == targets[u])
                    total += 1.0 / std::log2(i + 2.0);
        }
        return total / static_cast<double>(lists.size());
    }
};

}  // namespace

TEST_CASE("single-item cache ranks that item first") {
    Mat cache = random_mat(1, 4, 1);
    Eigen::RowVectorXd r = random_mat(1, 4, 2).row(0);
    auto order = rank_full(r, cache, {});
    REQUIRE(order.size() == 1);
    CHECK(order[0] == 0);
}

TEST_CASE("r equal to a unit rep ranks it first") {
    Mat cache = random_mat(20, 8, 3);
    for (long v = 0; v < 20; ++v) cache.row(v) /= cache.row(v).norm();
    Eigen::RowVectorXd r = cache.row(13);
    auto order = rank_full(r, cache, {});
    CHECK(order.front() == 13);
    CHECK(target_rank(r, cache, {}, 13) == 1);
}

TEST_CASE("rank_full matches a brute-force sort oracle on 50 random items") {
    Mat cache = random_mat(50, 6, 4);
    Eigen::RowVectorXd r = random_mat(1, 6, 5).row(0);
    std::set<int> exclude = {3, 17, 42};
    auto got = rank_full(r, cache, exclude);

    Eigen::VectorXd scores(50);
    for (int v = 0; v < 50; ++v)
        scores(v) = r.dot(cache.row(v)) / (r.norm() * cache.row(v).norm());
    auto expected = BruteForce::rank(scores, exclude);
    CHECK(got == expected);

    // target_rank agrees with the list position
    for (int v : {0, 7, 25, 49}) {
        auto it = std::find(got.begin(), got.end(), v);
        CHECK(target_rank(r, cache, exclude, v) ==
              static_cast<int>(std::distance(got.begin(), it)) + 1);
    }
}

TEST_CASE("excluded items never appear") {
    Mat cache = random_mat(30, 4, 6);
    Eigen::RowVectorXd r = random_mat(1, 4, 7).row(0);
    std::set<int> exclude = {1, 2, 3, 4, 5};
    auto order = rank_full(r, cache, exclude);
    CHECK(order.size() == 25);
    for (int v : order) CHECK(!exclude.count(v));
    CHECK(target_rank(r, cache, exclude, 2) == INT_MAX);
}

TEST_CASE("score ties break by ascending item index") {
    Mat cache(4, 2);
    cache << 1, 0, 1, 0, 1, 0, 1, 0;  // identical items
    Eigen::RowVectorXd r(2);
    r << 1, 0;
    auto order = rank_full(r, cache, {});
    CHECK(order == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("recall closed forms") {
    std::vector<std::vector<int>> lists = {{5, 1, 2}, {9, 5, 3}, {0, 7, 5}};
    std::vector<int> targets = {5, 5, 5};
    CHECK(recall_at_k(lists, targets, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(recall_at_k(lists, targets, 3) == doctest::Approx(1.0));
    // target always at rank 1
    CHECK(recall_at_k({{4}, {4}}, {4, 4}, 1) == doctest::Approx(1.0));
    // target always past K
    std::vector<std::vector<int>> deep = {{1, 2, 3, 4, 9}};
    CHECK(recall_at_k(deep, {9}, 4) == doctest::Approx(0.0));
}

TEST_CASE("recall hand count: ranks 1, 7, 12 at K=10") {
    CHECK(recall_from_ranks({1, 7, 12}, 10) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ndcg closed forms") {
    CHECK(ndcg_from_ranks({1}, 10) == doctest::Approx(1.0));
    CHECK(ndcg_from_ranks({2}, 10) == doctest::Approx(1.0 / std::log2(3.0)));
    CHECK(ndcg_from_ranks({1, 3, 20}, 10) == doctest::Approx((1.0 + 0.5 + 0.0) / 3.0));
}

TEST_CASE("metrics equal the brute-force oracle on 100 users x 50 items") {
    std::mt19937_64 rng(8);
    std::vector<std::vector<int>> lists;
    std::vector<int> targets;
    std::vector<int> ranks;
    for (int u = 0; u < 100; ++u) {
        Eigen::VectorXd scores = random_mat(50, 1, 100 + u).col(0);
        auto list = BruteForce::rank(scores, {});
        int target = static_cast<int>(rng() % 50);
        auto it = std::find(list.begin(), list.end(), target);
        ranks.push_back(static_cast<int>(std::distance(list.begin(), it)) + 1);
        lists.push_back(std::move(list));
        targets.push_back(target);
    }
    for (int k : {1, 5, 10, 50}) {
        CHECK(recall_at_k(lists, targets, k) == BruteForce::recall(lists, targets, k));
        CHECK(ndcg_at_k(lists, targets, k) == BruteForce::ndcg(lists, targets, k));
        CHECK(recall_from_ranks(ranks, k) == BruteForce::recall(lists, targets, k));
        CHECK(ndcg_from_ranks(ranks, k) == BruteForce::ndcg(lists, targets, k));
    }
}

TEST_CASE("recall is monotone in K and ndcg <= recall") {
    std::mt19937_64 rng(9);
    std::vector<int> ranks;
    for (int u = 0; u < 200; ++u) ranks.push_back(1 + static_cast<int>(rng() % 40));
    double prev = 0.0;
    for (int k = 1; k <= 40; ++k) {
        double rec = recall_from_ranks(ranks, k);
        CHECK(rec >= prev);
        CHECK(ndcg_from_ranks(ranks, k) <= rec + 1e-12);
        prev = rec;
    }
}
