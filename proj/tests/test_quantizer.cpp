#include <doctest.h>

#include <cmath>

#include "ccfrec/quantizer.hpp"

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

// exhaustive nearest-centroid scan, lowest index wins ties
int brute_nearest(const Eigen::RowVectorXd& x, const Mat& centroids) {
    int best = 0;
    double best_d = (x - centroids.row(0)).squaredNorm();
    for (long cc = 1; cc < centroids.rows(); ++cc) {
        double d = (x - centroids.row(cc)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(cc);
        }
    }
    return best;
}

}  // namespace

TEST_CASE("n = C distinct vectors become their own centroids") {
    Mat v = random_mat(4, 3, 1);
    auto res = fit_kmeans(v, 4, 7);
    CHECK(res.objective == doctest::Approx(0.0).epsilon(1e-12));
    for (long i = 0; i < 4; ++i)
        CHECK((v.row(i) - res.centroids.row(res.assignment[static_cast<std::size_t>(i)])).norm() <
              1e-9);
}

TEST_CASE("two separated blobs give the blob means") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 0.05);
    Mat v(60, 2);
    Eigen::RowVector2d c1(5.0, 5.0), c2(-5.0, -5.0);
    for (int i = 0; i < 30; ++i) v.row(i) = c1 + Eigen::RowVector2d(n(rng), n(rng));
    for (int i = 30; i < 60; ++i) v.row(i) = c2 + Eigen::RowVector2d(n(rng), n(rng));
    Eigen::RowVector2d mean1 = v.topRows(30).colwise().mean();
    Eigen::RowVector2d mean2 = v.bottomRows(30).colwise().mean();

    auto res = fit_kmeans(v, 2, 11);
    double direct = std::min((res.centroids.row(0) - mean1).norm() +
                                 (res.centroids.row(1) - mean2).norm(),
                             (res.centroids.row(0) - mean2).norm() +
                                 (res.centroids.row(1) - mean1).norm());
    CHECK(direct < 1e-4);
}

TEST_CASE("k-means objective is non-increasing over Lloyd iterations") {
    Mat v = random_mat(200, 8, 3);
    auto res = fit_kmeans(v, 10, 5);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
        CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-9);
}

TEST_CASE("k-means is deterministic under a fixed seed") {
    Mat v = random_mat(100, 4, 4);
    auto a = fit_kmeans(v, 8, 42);
    auto b = fit_kmeans(v, 8, 42);
    CHECK(a.centroids == b.centroids);
    CHECK(a.assignment == b.assignment);
}

TEST_CASE("too few vectors is an error") {
    CHECK_THROWS_AS(fit_kmeans(random_mat(3, 2, 5), 4, 1), TooFewVectorsError);
}

TEST_CASE("pq with k=1 equals plain k-means") {
    Mat v = random_mat(50, 6, 6);
    auto view = fit_pq(v, 1, 4, 9);
    auto km = fit_kmeans(v, 4, hash_combine(9, 1000u));
    REQUIRE(view.levels.size() == 1);
    CHECK(view.levels[0] == km.centroids);
}

TEST_CASE("pq splits into k codebooks of width d_e/k") {
    Mat v = random_mat(64, 16, 7);
    auto view = fit_pq(v, 4, 8, 1);
    CHECK(view.levels.size() == 4);
    for (const auto& level : view.levels) {
        CHECK(level.rows() == 8);
        CHECK(level.cols() == 4);
    }
    CHECK_THROWS_AS(fit_pq(random_mat(8, 10, 8), 3, 2, 1), Error);  // 10 % 3 != 0
}

TEST_CASE("pq reconstruction error is additive over sub-spaces") {
    Mat v = random_mat(64, 16, 9);
    const int k = 4, C = 8;
    auto view = fit_pq(v, k, C, 3);
    double total = 0.0;
    for (long i = 0; i < v.rows(); ++i) {
        auto codes = assign_view_codes(v.row(i).transpose(), view, QuantMethod::PQ);
        total += (v.row(i).transpose() - reconstruct_view(codes, view, QuantMethod::PQ))
                     .squaredNorm();
    }
    // brute force: per-sub-space nearest-centroid error sums
    double per_space = 0.0;
    for (int j = 0; j < k; ++j) {
        Mat sub = v.middleCols(j * 4, 4);
        for (long i = 0; i < sub.rows(); ++i) {
            int c = brute_nearest(sub.row(i), view.levels[static_cast<std::size_t>(j)]);
            per_space +=
                (sub.row(i) - view.levels[static_cast<std::size_t>(j)].row(c)).squaredNorm();
        }
    }
    CHECK(total == doctest::Approx(per_space).epsilon(1e-10));
}

TEST_CASE("rq with k=1 equals plain k-means") {
    Mat v = random_mat(40, 5, 10);
    auto view = fit_rq(v, 1, 4, 13);
    auto km = fit_kmeans(v, 4, hash_combine(13, 2000u));
    REQUIRE(view.levels.size() == 1);
    CHECK(view.levels[0] == km.centroids);
}

TEST_CASE("rq residual norms are non-increasing per level") {
    Mat v = random_mat(64, 8, 11);
    const int k = 3, C = 8;
    auto view = fit_rq(v, k, C, 17);
    for (long i = 0; i < v.rows(); ++i) {
        Eigen::RowVectorXd residual = v.row(i);
        double prev = -1.0;
        for (int j = 0; j < k; ++j) {
            int c = brute_nearest(residual, view.levels[static_cast<std::size_t>(j)]);
            residual -= view.levels[static_cast<std::size_t>(j)].row(c);
            // the sequence of residual norms (one per level) never grows
            if (j > 0) CHECK(residual.norm() <= prev + 1e-9);
            prev = residual.norm();
        }
    }
}

TEST_CASE("rq codes match a per-level exhaustive oracle") {
    Mat v = random_mat(32, 6, 12);
    auto view = fit_rq(v, 2, 5, 23);
    for (long i = 0; i < v.rows(); ++i) {
        auto codes = assign_view_codes(v.row(i).transpose(), view, QuantMethod::RQ);
        Eigen::RowVectorXd residual = v.row(i);
        for (int j = 0; j < 2; ++j) {
            int expected = brute_nearest(residual, view.levels[static_cast<std::size_t>(j)]);
            CHECK(codes[static_cast<std::size_t>(j)] == expected);
            residual -= view.levels[static_cast<std::size_t>(j)].row(expected);
        }
    }
}

TEST_CASE("assign_codes produces m*k codes in range, matching brute force") {
    // toy corpus: 64 items x 16 dims per view, 2 views
    EmbeddingMap raw;
    for (int i = 0; i < 64; ++i) {
        Mat emb(2, 16);
        emb.row(0) = random_mat(1, 16, 100 + i);
        emb.row(1) = random_mat(1, 16, 200 + i);
        raw.emplace("it" + std::to_string(i), emb);
    }
    for (QuantMethod method : {QuantMethod::PQ, QuantMethod::RQ}) {
        auto cb = fit_codebook(raw, method, 4, 8, 77);
        auto codes = assign_codes(raw, cb);
        REQUIRE(codes.size() == 64);
        for (const auto& [id, tuple] : codes) {
            CHECK(tuple.codes.size() == 8);  // m*k = 2*4
            for (int c : tuple.codes) {
                CHECK(c >= 0);
                CHECK(c < 8);
            }
            // brute-force check per view
            const Mat& emb = raw.at(id);
            for (int view = 0; view < 2; ++view) {
                auto expected = assign_view_codes(emb.row(view).transpose(),
                                                  cb.views[static_cast<std::size_t>(view)],
                                                  method);
                for (int j = 0; j < 4; ++j)
                    CHECK(tuple.codes[static_cast<std::size_t>(view * 4 + j)] ==
                          expected[static_cast<std::size_t>(j)]);
            }
        }
    }
}

TEST_CASE("vector equal to a centroid maps to it exactly") {
    Mat v = random_mat(20, 8, 13);
    auto view = fit_pq(v, 2, 5, 31);
    Eigen::VectorXd probe(8);
    probe.segment(0, 4) = view.levels[0].row(2).transpose();
    probe.segment(4, 4) = view.levels[1].row(4).transpose();
    auto codes = assign_view_codes(probe, view, QuantMethod::PQ);
    CHECK(codes[0] == 2);
    CHECK(codes[1] == 4);
    CHECK((reconstruct_view(codes, view, QuantMethod::PQ) - probe).norm() == 0.0);
}

TEST_CASE("pq beats the all-zero reconstruction on centered data") {
    Mat v = random_mat(128, 8, 14);
    v.rowwise() -= v.colwise().mean();  // centered
    auto view = fit_pq(v, 2, 16, 5);
    double quant_err = 0.0;
    for (long i = 0; i < v.rows(); ++i) {
        auto codes = assign_view_codes(v.row(i).transpose(), view, QuantMethod::PQ);
        quant_err += (v.row(i).transpose() - reconstruct_view(codes, view, QuantMethod::PQ))
                         .squaredNorm();
    }
    CHECK(quant_err <= v.squaredNorm());
}

TEST_CASE("random codes: determinism, range, rough uniformity") {
    std::vector<std::string> items;
    for (int i = 0; i < 10000; ++i) items.push_back("x" + std::to_string(i));

    SUBCASE("C=1 gives all zeros") {
        auto codes = random_codes(items, 2, 2, 1, 4);
        for (const auto& [id, t] : codes)
            for (int c : t.codes) CHECK(c == 0);
    }
    SUBCASE("same seed twice is identical") {
        auto a = random_codes(items, 1, 4, 16, 9);
        auto b = random_codes(items, 1, 4, 16, 9);
        for (const auto& [id, t] : a) CHECK(t.codes == b.at(id).codes);
    }
    SUBCASE("histogram is uniform within 3-sigma binomial bounds") {
        const int C = 8;
        auto codes = random_codes(items, 1, 1, C, 21);
        std::vector<long> hist(C, 0);
        for (const auto& [id, t] : codes) ++hist[static_cast<std::size_t>(t.codes[0])];
        double n = 10000.0, p = 1.0 / C;
        double sigma = std::sqrt(n * p * (1 - p));
        for (long h : hist) {
            CHECK(h > n * p - 3 * sigma);
            CHECK(h < n * p + 3 * sigma);
        }
    }
}
