#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "ccfrec/fusion.hpp"
#include "ccfrec/model.hpp"

using namespace ccfrec;
using ad::Mat;
using ad::Tape;

namespace {

Mat random_mat(long r, long c, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat m(r, c);
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.d = 16;
    cfg.heads = 2;
    cfg.sfm_layers = 2;
    cfg.backbone_layers = 1;
    cfg.ffn = 32;
    cfg.m = 2;
    cfg.k = 3;
    cfg.C = 5;
    cfg.max_seq_len = 8;
    cfg.dropout = 0.0;
    cfg.vocab_size = 10;
    cfg.init_seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("lookup_codes gathers per-position rows, including MASK") {
    CcfrecModel model(small_config());
    Tape t;
    std::vector<int> codes = {0, 0, 0, 0, 0, 0};
    ad::Var z = model.sfm().lookup_codes(t, codes);
    for (int l = 0; l < 6; ++l)
        CHECK(t.value(z).row(l) == model.sfm().code_table(l).value.row(0));

    std::vector<int> masked = {5, 5, 5, 5, 5, 5};  // C = 5 is the MASK row
    ad::Var zm = model.sfm().lookup_codes(t, masked);
    for (int l = 0; l < 6; ++l)
        CHECK(t.value(zm).row(l) == model.sfm().code_table(l).value.row(5));

    std::vector<int> bad = {6, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(model.sfm().lookup_codes(t, bad), Error);
}

TEST_CASE("unused table rows get zero gradient") {
    CcfrecModel model(small_config());
    Tape t;
    std::vector<int> codes = {1, 2, 0, 3, 4, 1};
    FuseResult fr = model.fuse_codes(t, codes, random_mat(2, 16, 1));
    t.backward(t.ce_rows(fr.e_tilde, {0}, ad::Reduction::Sum));
    // position 0 used code 1; its other rows stay untouched
    const Mat& g = model.sfm().code_table(0).grad;
    CHECK(g.row(1).norm() > 0.0);
    CHECK(g.row(0).norm() == 0.0);
    CHECK(g.row(5).norm() == 0.0);
}

TEST_CASE("permuting code positions together with their tables leaves e_tilde unchanged") {
    ModelConfig cfg = small_config();
    CcfrecModel model(cfg);
    std::vector<int> codes = {1, 2, 0, 3, 4, 1};
    Mat zt = random_mat(2, 16, 2);

    Tape t0;
    Mat base = t0.value(model.fuse_codes(t0, codes, zt).e_tilde);

    // model with permuted code-position tables
    std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    CcfrecModel permuted(cfg);
    for (ad::Param* p : model.params().all())
        permuted.params().at(p->name).value = p->value;
    for (int l = 0; l < 6; ++l)
        permuted.sfm().code_table(l).value =
            model.sfm().code_table(perm[static_cast<std::size_t>(l)]).value;
    std::vector<int> permuted_codes(6);
    for (int l = 0; l < 6; ++l)
        permuted_codes[static_cast<std::size_t>(l)] =
            codes[static_cast<std::size_t>(perm[static_cast<std::size_t>(l)])];

    Tape t1;
    Mat out = t1.value(permuted.fuse_codes(t1, permuted_codes, zt).e_tilde);
    CHECK((out - base).norm() / base.norm() <= 1e-5);
}

TEST_CASE("permuting text rows leaves e_tilde unchanged") {
    CcfrecModel model(small_config());
    std::vector<int> codes = {1, 2, 0, 3, 4, 1};
    Mat zt = random_mat(2, 16, 4);
    Mat zt_swapped(2, 16);
    zt_swapped.row(0) = zt.row(1);
    zt_swapped.row(1) = zt.row(0);

    Tape t0, t1;
    Mat a = t0.value(model.fuse_codes(t0, codes, zt).e_tilde);
    Mat b = t1.value(model.fuse_codes(t1, codes, zt_swapped).e_tilde);
    CHECK((a - b).norm() / a.norm() <= 1e-5);
}

TEST_CASE("zero SFM layers degenerate to twice the pooled code embedding") {
    ModelConfig cfg = small_config();
    cfg.sfm_layers = 0;
    CcfrecModel model(cfg);
    std::vector<int> codes = {0, 1, 2, 3, 4, 0};
    Tape t;
    FuseResult fr = model.fuse_codes(t, codes, random_mat(2, 16, 5));
    Mat zc = t.value(fr.z_codes);
    Mat expected = 2.0 * zc.colwise().mean();
    CHECK((t.value(fr.e_tilde) - expected).norm() < 1e-12);
}

TEST_CASE("eval-mode forward is bitwise deterministic") {
    CcfrecModel model(small_config());
    std::vector<int> codes = {1, 2, 0, 3, 4, 1};
    Mat zt = random_mat(2, 16, 6);
    Tape t0, t1;
    Mat a = t0.value(model.fuse_codes(t0, codes, zt).e_tilde);
    Mat b = t1.value(model.fuse_codes(t1, codes, zt).e_tilde);
    CHECK(a == b);
}

TEST_CASE("e_tilde depends on the text embeddings") {
    CcfrecModel model(small_config());
    std::vector<int> codes = {1, 2, 0, 3, 4, 1};
    Mat zt = random_mat(2, 16, 7);
    Tape t0, t1;
    Mat with_text = t0.value(model.fuse_codes(t0, codes, zt).e_tilde);
    Mat without = t1.value(model.fuse_codes(t1, codes, Mat::Zero(2, 16)).e_tilde);
    CHECK((with_text - without).norm() > 1e-8);
}

TEST_CASE("mask_codes selects ceil(rho * n) positions") {
    std::vector<int> codes(20, 1);
    auto mr = mask_codes(codes, 0.5, 8, uint64_t{42});
    CHECK(mr.mask_set.size() == 10);
    CHECK(mr.codes.size() == 20);
    CHECK(std::is_sorted(mr.mask_set.begin(), mr.mask_set.end()));
    // untouched positions keep their codes
    std::set<int> masked(mr.mask_set.begin(), mr.mask_set.end());
    for (int i = 0; i < 20; ++i)
        if (!masked.count(i)) CHECK(mr.codes[static_cast<std::size_t>(i)] == 1);
}

TEST_CASE("mask_codes with the BERT sub-rule disabled masks everything selected") {
    std::vector<int> codes(12, 3);
    auto mr = mask_codes(codes, 1.0, 6, uint64_t{1}, /*bert_rule=*/false);
    CHECK(mr.mask_set.size() == 12);
    for (int c : mr.codes) CHECK(c == 6);
}

TEST_CASE("mask_codes is deterministic under a seed") {
    std::vector<int> codes(16, 2);
    auto a = mask_codes(codes, 0.4, 9, uint64_t{7});
    auto b = mask_codes(codes, 0.4, 9, uint64_t{7});
    CHECK(a.mask_set == b.mask_set);
    CHECK(a.codes == b.codes);
}

TEST_CASE("mask_codes follows the 80/10/10 recipe in aggregate") {
    std::vector<int> codes(10, 0);
    const int C = 50;
    int masked = 0, random_replaced = 0, unchanged = 0, total = 0;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        auto mr = mask_codes(codes, 1.0, C, rng);
        for (int pos : mr.mask_set) {
            int v = mr.codes[static_cast<std::size_t>(pos)];
            ++total;
            if (v == C)
                ++masked;
            else if (v == 0)
                ++unchanged;  // includes random draws that hit 0 (prob 1/C)
            else
                ++random_replaced;
        }
    }
    CHECK(masked / static_cast<double>(total) == doctest::Approx(0.8).epsilon(0.03));
    CHECK(random_replaced / static_cast<double>(total) ==
          doctest::Approx(0.1 * (C - 1.0) / C).epsilon(0.15));
    CHECK(unchanged / static_cast<double>(total) ==
          doctest::Approx(0.1 + 0.1 / C).epsilon(0.15));
}

TEST_CASE("no_cross_attention ablation mean-pools codes and text") {
    ModelConfig cfg = small_config();
    cfg.ablation.no_cross_attention = true;
    CcfrecModel model(cfg);
    std::vector<int> codes = {0, 1, 2, 3, 4, 0};
    SUBCASE("zero inputs give a zero representation") {
        for (int l = 0; l < 6; ++l) model.sfm().code_table(l).value.setZero();
        Tape t;
        FuseResult fr = model.fuse_codes(t, codes, Mat::Zero(2, 16));
        CHECK(t.value(fr.e_tilde).norm() == 0.0);
    }
    SUBCASE("matches the explicit mean") {
        Mat zt = random_mat(2, 16, 8);
        Tape t;
        FuseResult fr = model.fuse_codes(t, codes, zt);
        Mat all(8, 16);
        all.topRows(6) = t.value(fr.z_codes);
        all.bottomRows(2) = zt;
        Mat expected = all.colwise().mean();
        CHECK((t.value(fr.e_tilde) - expected).norm() < 1e-12);
    }
}

TEST_CASE("NaN inputs abort with the block index") {
    CcfrecModel model(small_config());
    std::vector<int> codes = {1, 2, 0, 3, 4, 1};
    Mat zt = random_mat(2, 16, 9);
    zt(0, 0) = std::numeric_limits<double>::quiet_NaN();
    Tape t;
    CHECK_THROWS_WITH_AS(model.fuse_codes(t, codes, zt), doctest::Contains("block 0"), Error);
}

TEST_CASE("no_text ablation ignores the text input entirely") {
    ModelConfig cfg = small_config();
    cfg.ablation.no_text = true;
    CcfrecModel model(cfg);
    std::vector<int> codes = {1, 2, 0, 3, 4, 1};
    Tape t0, t1;
    Mat a = t0.value(model.fuse_codes(t0, codes, random_mat(2, 16, 10)).e_tilde);
    Mat b = t1.value(model.fuse_codes(t1, codes, random_mat(2, 16, 11)).e_tilde);
    CHECK(a == b);
}
