#include "ccfrec/textenc.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>

namespace ccfrec {

Eigen::VectorXd HashingTextEncoder::token_vector(std::string_view token) const {
    std::mt19937_64 gen(hash_combine(seed_, fnv1a64(token)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = normal(gen);
    return v;
}

Eigen::VectorXd HashingTextEncoder::encode(const std::string& text) const {
    auto tokens = whitespace_tokens(text);
    if (tokens.empty()) return token_vector("");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim_);
    for (auto tok : tokens) sum += token_vector(tok);
    return sum / static_cast<double>(tokens.size());
}

EmbeddingMap encode_corpus(const std::vector<Item>& items, const TextEncoder& encoder) {
    EmbeddingMap out;
    for (const auto& item : items) {
        Mat emb(static_cast<long>(item.attributes.size()), encoder.dim());
        for (std::size_t a = 0; a < item.attributes.size(); ++a) {
            try {
                emb.row(static_cast<long>(a)) = encoder.encode(item.attributes[a]).transpose();
            } catch (const std::exception& e) {
                throw Error("encoder failed on item " + item.item_id + " field #" +
                            std::to_string(a) + ": " + e.what());
            }
        }
        if (!emb.allFinite())
            throw Error("non-finite embedding for item " + item.item_id);
        out.emplace(item.item_id, std::move(emb));
    }
    return out;
}

PcaTransform fit_pca(const Mat& rows, int d) {
    const long n = rows.rows();
    const long de = rows.cols();
    if (d > de) throw Error("fit_pca: d must be <= d_e");
    if (n < d) throw Error("fit_pca: need at least d rows");

    PcaTransform pca;
    pca.mean = rows.colwise().mean();
    Mat centered = rows.rowwise() - pca.mean.transpose();

    Eigen::BDCSVD<Mat> svd(centered, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = sv.size() ? sv(0) * 1e-12 : 0.0;
    int rank = 0;
    for (long i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    pca.effective_rank = std::min<long>(rank, d);

    pca.components = svd.matrixV().leftCols(d);
    // Deterministic sign: largest-magnitude entry of each component positive.
    for (int c = 0; c < d; ++c) {
        long arg = 0;
        pca.components.col(c).cwiseAbs().maxCoeff(&arg);
        if (pca.components(arg, c) < 0) pca.components.col(c) = -pca.components.col(c);
    }

    double total_var = centered.squaredNorm() / static_cast<double>(std::max<long>(n - 1, 1));
    pca.explained_ratio = Eigen::VectorXd::Zero(d);
    if (total_var > 0) {
        for (int c = 0; c < d; ++c) {
            double var = sv(c) * sv(c) / static_cast<double>(std::max<long>(n - 1, 1));
            pca.explained_ratio(c) = var / total_var;
        }
    }
    return pca;
}

Mat project(const Mat& raw, const PcaTransform& pca) {
    if (raw.cols() != pca.mean.size())
        throw Error("project: dimension mismatch between rows and transform");
    return (raw.rowwise() - pca.mean.transpose()) * pca.components;
}

}  // namespace ccfrec
