#include "ccfrec/objectives.hpp"

namespace ccfrec {

Var cosine_logits(Tape& t, Var a, Var b, double tau) {
    if (tau <= 0.0) throw Error("temperature must be positive");
    Var an = t.l2_normalize_rows(a);
    Var bn = t.l2_normalize_rows(b);
    return t.scale(t.matmul_nt(an, bn), 1.0 / tau);
}

Var loss_ce_batch(Tape& t, Var user_reps, Var candidate_reps, std::vector<int> targets,
                  double tau) {
    Var logits = cosine_logits(t, user_reps, candidate_reps, tau);
    return t.ce_rows(logits, std::move(targets), ad::Reduction::Mean);
}

Var loss_ce(Tape& t, Var user_rep, Var target_rep, const std::vector<Var>& negative_reps,
            double tau) {
    std::vector<Var> rows;
    rows.reserve(negative_reps.size() + 1);
    rows.push_back(target_rep);
    for (Var n : negative_reps) rows.push_back(n);
    return loss_ce_batch(t, user_rep, t.vstack(rows), {0}, tau);
}

Var loss_mcm(Tape& t, const std::vector<McmGroup>& groups, int C, double tau) {
    long total_masked = 0;
    std::vector<Var> sums;
    for (const auto& g : groups) {
        if (g.true_codes.empty()) continue;
        total_masked += static_cast<long>(g.true_codes.size());
        std::vector<int> all_codes(static_cast<std::size_t>(C));
        for (int c = 0; c < C; ++c) all_codes[static_cast<std::size_t>(c)] = c;
        Var table_rows = t.rows_of(*g.table, std::move(all_codes));
        Var logits = cosine_logits(t, g.states, table_rows, tau);
        sums.push_back(t.ce_rows(logits, g.true_codes, ad::Reduction::Sum));
    }
    if (sums.empty()) return t.constant(Mat::Zero(1, 1));
    Var total = sums.front();
    for (std::size_t i = 1; i < sums.size(); ++i) total = t.add(total, sums[i]);
    return t.scale(total, 1.0 / static_cast<double>(total_masked));
}

Var loss_msa(Tape& t, Var reps, Var reps_augmented, double tau) {
    const long b = reps.rows();
    if (b < 2) throw Error("loss_msa: batch size must be >= 2");
    if (reps_augmented.rows() != b) throw Error("loss_msa: batch size mismatch");
    std::vector<int> diag(static_cast<std::size_t>(b));
    for (long i = 0; i < b; ++i) diag[static_cast<std::size_t>(i)] = static_cast<int>(i);

    // InfoNCE(augmented, original, batch of originals)
    Var d1 = t.ce_rows(cosine_logits(t, reps_augmented, reps, tau), diag, ad::Reduction::Mean);
    // InfoNCE(original, augmented, batch of augmented)
    Var d2 = t.ce_rows(cosine_logits(t, reps, reps_augmented, tau), diag, ad::Reduction::Mean);
    return t.scale(t.add(d1, d2), 0.5);
}

double loss_total(double ce, double mcm, double msa, double alpha, double beta) {
    return ce + alpha * mcm + beta * msa;
}

Var loss_total(Tape& t, Var ce, const Var* mcm, const Var* msa, double alpha, double beta) {
    Var out = ce;
    if (mcm && alpha != 0.0) out = t.add(out, t.scale(*mcm, alpha));
    if (msa && beta != 0.0) out = t.add(out, t.scale(*msa, beta));
    return out;
}

}  // namespace ccfrec
