#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "ccfrec/textenc.hpp"

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

}  // namespace

TEST_CASE("hash encoder is deterministic and text-sensitive") {
    HashingTextEncoder enc(32, 99);
    auto a1 = enc.encode("abc");
    auto a2 = enc.encode("abc");
    CHECK(a1 == a2);  // bitwise
    CHECK((enc.encode("abc") - enc.encode("abd")).norm() > 0.1);
    // empty string has its own stable embedding
    CHECK(enc.encode("") == enc.encode("   "));
    CHECK(enc.encode("").norm() > 0.0);
}

TEST_CASE("shared vocabulary pulls encodings together") {
    HashingTextEncoder enc(64, 7);
    auto a = enc.encode("red drum kit snare cymbal");
    auto b = enc.encode("drum cymbal snare red stand");
    auto c = enc.encode("quantum flux capacitor core widget");
    CHECK((a - b).norm() < (a - c).norm());
}

TEST_CASE("encode_corpus shapes and determinism") {
    std::vector<Item> items = {
        {"A", {"guitar", "", "strings", "", ""}},
        {"B", {"guitar", "", "strings", "", ""}},
    };
    HashingTextEncoder enc(16, 1);
    auto out = encode_corpus(items, enc);
    REQUIRE(out.size() == 2);
    CHECK(out.at("A").rows() == 5);
    CHECK(out.at("A").cols() == 16);
    CHECK(out.at("A") == out.at("B"));  // identical texts -> identical rows
}

TEST_CASE("pca recovers an axis-aligned component") {
    Mat pts(100, 2);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        pts(i, 0) = n(rng) * 5.0;
        pts(i, 1) = 0.0;
    }
    auto pca = fit_pca(pts, 1);
    CHECK(std::abs(std::abs(pca.components(0, 0)) - 1.0) < 1e-9);
    CHECK(std::abs(pca.components(1, 0)) < 1e-9);
    CHECK(pca.explained_ratio(0) == doctest::Approx(1.0));
}

TEST_CASE("pca is lossless when intrinsic rank fits") {
    // rank-3 data in 8 dimensions
    Mat basis = random_mat(3, 8, 4);
    Mat coef = random_mat(60, 3, 5);
    Mat data = coef * basis;
    auto pca = fit_pca(data, 3);
    Mat projected = project(data, pca);
    Mat lifted = (projected * pca.components.transpose()).rowwise() + pca.mean.transpose();
    CHECK((lifted - data).norm() / data.norm() < 1e-6);
}

TEST_CASE("explained variance matches an eigendecomposition oracle") {
    Mat data = random_mat(100, 16, 6);
    auto pca = fit_pca(data, 4);

    // oracle: eigenvalues of the sample covariance
    Mat centered = data.rowwise() - data.colwise().mean();
    Mat cov = centered.transpose() * centered / 99.0;
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    Eigen::VectorXd evals = eig.eigenvalues().reverse();
    double total = evals.sum();
    for (int i = 0; i < 4; ++i)
        CHECK(pca.explained_ratio(i) == doctest::Approx(evals(i) / total).epsilon(1e-6));

    // components orthonormal within 1e-5
    Mat gram = pca.components.transpose() * pca.components;
    CHECK((gram - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("projection matches direct matrix arithmetic") {
    Mat data = random_mat(12, 6, 8);
    auto pca = fit_pca(data, 3);
    Mat raw = random_mat(3, 6, 9);
    Mat expected = (raw.rowwise() - pca.mean.transpose()) * pca.components;
    CHECK((project(raw, pca) - expected).norm() == 0.0);

    // a row equal to the mean projects to zero
    Mat mean_row = pca.mean.transpose();
    CHECK(project(mean_row, pca).norm() < 1e-12);
}

TEST_CASE("full-dimension pca preserves pairwise distances") {
    Mat data = random_mat(40, 6, 10);
    auto pca = fit_pca(data, 6);
    Mat z = project(data, pca);
    for (int i = 0; i < 10; ++i)
        for (int j = i + 1; j < 10; ++j) {
            double orig = (data.row(i) - data.row(j)).norm();
            double proj = (z.row(i) - z.row(j)).norm();
            CHECK(proj == doctest::Approx(orig).epsilon(1e-5));
        }
}

TEST_CASE("pca applied twice gives identical output") {
    Mat data = random_mat(30, 5, 11);
    auto pca = fit_pca(data, 2);
    CHECK(project(data, pca) == project(data, pca));
}

TEST_CASE("rank-deficient data reports effective rank") {
    Mat basis = random_mat(2, 6, 12);
    Mat data = random_mat(50, 2, 13) * basis;
    auto pca = fit_pca(data, 4);
    CHECK(pca.effective_rank == 2);
    // completion is still orthonormal
    Mat gram = pca.components.transpose() * pca.components;
    CHECK((gram - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("pca preconditions") {
    Mat data = random_mat(3, 4, 14);
    CHECK_THROWS_AS(fit_pca(data, 5), Error);   // d > d_e
    CHECK_THROWS_AS(fit_pca(data, 4), Error);   // n < d
    CHECK_THROWS_AS(project(random_mat(2, 3, 15), fit_pca(data, 2)), Error);  // width mismatch
}
