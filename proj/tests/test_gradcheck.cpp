#include <doctest.h>

// Model-level gradient checks: every parameter of the full pipeline
// (code tables, SFM, backbone, positions) against central finite differences
// on a smooth-temperature instance.

#include "ccfrec/corpus.hpp"
#include "ccfrec/model.hpp"
#include "ccfrec/objectives.hpp"

using namespace ccfrec;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

Mat random_mat(long r, long c, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat m(r, c);
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

struct Instance {
    std::unique_ptr<CcfrecModel> model;
    ItemTensors items;
    std::vector<SplitExample> batch;
    std::vector<std::vector<int>> masked_codes;
    std::vector<std::vector<int>> mask_sets;
    double tau = 1.0;

    Instance() {
        ModelConfig cfg;
        cfg.d = 8;
        cfg.heads = 2;
        cfg.sfm_layers = 1;
        cfg.backbone_layers = 1;
        cfg.ffn = 16;
        cfg.m = 2;
        cfg.k = 2;
        cfg.C = 4;
        cfg.max_seq_len = 6;
        cfg.dropout = 0.0;
        cfg.vocab_size = 5;
        cfg.init_seed = 41;
        model = std::make_unique<CcfrecModel>(cfg);
        std::mt19937_64 rng(43);
        for (int v = 0; v < 5; ++v) {
            std::vector<int> codes;
            for (int i = 0; i < 4; ++i) codes.push_back(static_cast<int>(rng() % 4));
            items.codes.push_back(codes);
            items.text.push_back(random_mat(2, 8, 700 + v));
            MaskResult mr = mask_codes(codes, 0.5, 4, rng);
            masked_codes.push_back(mr.codes);
            mask_sets.push_back(mr.mask_set);
        }
        batch.push_back({{0, 1}, 2, 0});
        batch.push_back({{2, 3}, 4, 1});
    }

    Var build(Tape& t) const {
        std::vector<Var> fused, masked_fused;
        std::vector<McmGroup> groups(4);
        std::vector<std::vector<Var>> group_rows(4);
        for (int v = 0; v < 5; ++v) {
            fused.push_back(model->fuse(t, items, v).e_tilde);
            FuseResult fr = model->fuse_codes(t, masked_codes[static_cast<std::size_t>(v)],
                                              items.text[static_cast<std::size_t>(v)]);
            masked_fused.push_back(fr.e_tilde);
            for (int pos : mask_sets[static_cast<std::size_t>(v)]) {
                group_rows[static_cast<std::size_t>(pos)].push_back(
                    t.pick_rows(fr.states, {pos}));
                groups[static_cast<std::size_t>(pos)].true_codes.push_back(
                    items.codes[static_cast<std::size_t>(v)][static_cast<std::size_t>(pos)]);
            }
        }
        Var reps = t.vstack(fused);
        Var masked_reps = t.vstack(masked_fused);
        std::vector<Var> rows, aug_rows;
        for (const auto& ex : batch) {
            rows.push_back(model->backbone().forward(t, t.pick_rows(reps, ex.prefix)).r);
            aug_rows.push_back(
                model->backbone().forward(t, t.pick_rows(masked_reps, ex.prefix)).r);
        }
        Var user_reps = t.vstack(rows);
        Var aug_reps = t.vstack(aug_rows);

        Var candidates = t.pick_rows(reps, {2, 4});
        Var ce = loss_ce_batch(t, user_reps, candidates, {0, 1}, tau);

        std::vector<McmGroup> nonempty;
        for (int pos = 0; pos < 4; ++pos) {
            auto& g = groups[static_cast<std::size_t>(pos)];
            if (g.true_codes.empty()) continue;
            g.states = t.vstack(group_rows[static_cast<std::size_t>(pos)]);
            g.table = &model->sfm().code_table(pos);
            nonempty.push_back(std::move(g));
        }
        Var mcm = loss_mcm(t, nonempty, 4, tau);
        Var msa = loss_msa(t, user_reps, aug_reps, tau);
        return loss_total(t, ce, &mcm, &msa, 0.4, 0.2);
    }
};

}  // namespace

TEST_CASE("every model parameter passes the finite-difference check") {
    Instance inst;
    auto value = [&] {
        Tape t;
        return t.scalar(inst.build(t));
    };
    auto backward = [&] {
        Tape t;
        t.backward(inst.build(t));
    };
    double err = ad::max_grad_rel_error(inst.model->params(), value, backward, 1e-5, 1e-6);
    CHECK(err < 1e-4);
}
