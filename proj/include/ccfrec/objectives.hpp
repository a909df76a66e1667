#pragma once

// The three training objectives. All of them are softmax cross-entropies
// over cosine similarities divided by a temperature.

#include <vector>

#include "ccfrec/autodiff.hpp"

namespace ccfrec {

using ad::Mat;
using ad::Param;
using ad::Tape;
using ad::Var;

struct LossConfig {
    double tau = 0.07;
    double rho = 0.5;
    double alpha = 0.2;
    double beta = 0.2;
    bool in_batch_negatives = true;
    int uniform_k = 100;  // negatives per example when not in-batch
};

// cos(a_i, b_j) / tau for all row pairs; throws DegenerateRep on a zero row.
Var cosine_logits(Tape& t, Var a, Var b, double tau);

// Recommendation loss over a batch: row i of `user_reps` is scored against
// every row of `candidate_reps`; `targets[i]` names the positive row.
Var loss_ce_batch(Tape& t, Var user_reps, Var candidate_reps, std::vector<int> targets,
                  double tau);

// Single-instance form: candidates are {target} followed by the negatives.
Var loss_ce(Tape& t, Var user_rep, Var target_rep, const std::vector<Var>& negative_reps,
            double tau);

// Masked code modeling. Positions are grouped by code position so each group
// scores its states against that position's table rows [0, C) (the MASK row
// is excluded from the candidate set). The result is the sum of all per-
// position cross entropies divided by the total number of masked positions.
struct McmGroup {
    Var states;                   // rows of SFM output at this position's masked slots
    Param* table;                 // (C+1) x d code-embedding table
    std::vector<int> true_codes;  // one per state row
};
Var loss_mcm(Tape& t, const std::vector<McmGroup>& groups, int C, double tau);

// Symmetric InfoNCE between original and augmented sequence representations.
// Row i of each batch is the same user sequence; all rows of the opposite
// batch act as the candidate set. Batch size must be >= 2.
Var loss_msa(Tape& t, Var reps, Var reps_augmented, double tau);

// L = ce + alpha * mcm + beta * msa.
double loss_total(double ce, double mcm, double msa, double alpha, double beta);
Var loss_total(Tape& t, Var ce, const Var* mcm, const Var* msa, double alpha, double beta);

}  // namespace ccfrec
