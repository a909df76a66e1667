#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "ccfrec/common.hpp"
#include "ccfrec/textenc.hpp"

namespace ccfrec {

enum class QuantMethod { PQ, RQ };

QuantMethod quant_method_from_string(const std::string& s);
std::string to_string(QuantMethod m);

// Codebooks for one attribute view: k levels (RQ) or sub-spaces (PQ), each a
// C x w centroid matrix. PQ: w = d_e / k; RQ: w = d_e.
struct ViewCodebook {
    std::vector<Mat> levels;
};

// Frozen quantizer for the whole corpus: one ViewCodebook per attribute.
struct Codebook {
    QuantMethod method = QuantMethod::PQ;
    int m = 0;   // attribute views
    int k = 0;   // codes per view
    int C = 0;   // codebook size per level
    int w = 0;   // centroid width
    int d_e = 0;
    std::vector<ViewCodebook> views;

    int n_codes() const { return m * k; }
};

// Per item: n_c = m*k codes, each in [0, C). Concatenated in attribute order.
struct CodeTuple {
    std::string item_id;
    std::vector<int> codes;
};

using CodeMap = std::map<std::string, CodeTuple>;

struct KMeansResult {
    Mat centroids;      // C x w
    std::vector<int> assignment;
    double objective = 0.0;                // final sum of squared distances
    std::vector<double> objective_trace;   // one entry per Lloyd iteration
};

// k-means++ seeding followed by Lloyd iterations until the largest centroid
// shift drops below `tol` or `max_iters` is reached. Empty clusters are
// re-seeded from the point farthest from its centroid. Nearest-centroid ties
// break toward the lowest index.
KMeansResult fit_kmeans(const Mat& vectors, int C, uint64_t seed,
                        int max_iters = 100, double tol = 1e-6);

// Product quantization for one view: split columns into k contiguous blocks
// and fit one codebook per block. d_e must be divisible by k.
ViewCodebook fit_pq(const Mat& view_embeddings, int k, int C, uint64_t seed);

// Residual quantization for one view: level j is fitted on the residual after
// subtracting the reconstructions of levels < j.
ViewCodebook fit_rq(const Mat& view_embeddings, int k, int C, uint64_t seed);

// Fits one ViewCodebook per attribute over the raw (d_e) embeddings.
Codebook fit_codebook(const EmbeddingMap& raw, QuantMethod method, int k, int C, uint64_t seed);

// Codes for one raw embedding row under one view's codebook.
std::vector<int> assign_view_codes(const Eigen::VectorXd& embedding,
                                   const ViewCodebook& view, QuantMethod method);

// PQ: per-sub-space nearest centroid. RQ: greedy nearest centroid on
// successive residuals. Codes are concatenated per attribute in order.
CodeMap assign_codes(const EmbeddingMap& raw, const Codebook& codebook);

// Reconstruction of one view's embedding from its codes.
Eigen::VectorXd reconstruct_view(const std::vector<int>& codes, const ViewCodebook& view,
                                 QuantMethod method);

// Ablation: i.i.d. uniform codes in [0, C), deterministic under seed.
CodeMap random_codes(const std::vector<std::string>& items, int m, int k, int C, uint64_t seed);

}  // namespace ccfrec
