#include "ccfrec/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ccfrec {

QuantMethod quant_method_from_string(const std::string& s) {
    if (s == "pq" || s == "PQ") return QuantMethod::PQ;
    if (s == "rq" || s == "RQ") return QuantMethod::RQ;
    throw ConfigError("unknown quantization method: " + s);
}

std::string to_string(QuantMethod m) { return m == QuantMethod::PQ ? "pq" : "rq"; }

namespace {

int nearest_centroid(const Eigen::RowVectorXd& x, const Mat& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (long c = 0; c < centroids.rows(); ++c) {
        double d = (x - centroids.row(c)).squaredNorm();
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

KMeansResult fit_kmeans(const Mat& vectors, int C, uint64_t seed, int max_iters, double tol) {
    const long n = vectors.rows();
    if (n < C) throw TooFewVectorsError(n, C);

    std::mt19937_64 gen(seed);
    KMeansResult res;
    res.centroids = Mat::Zero(C, vectors.cols());

    // k-means++ seeding
    std::uniform_int_distribution<long> first(0, n - 1);
    res.centroids.row(0) = vectors.row(first(gen));
    Eigen::VectorXd dist2(n);
    for (long i = 0; i < n; ++i)
        dist2(i) = (vectors.row(i) - res.centroids.row(0)).squaredNorm();
    for (int c = 1; c < C; ++c) {
        double total = dist2.sum();
        long pick = 0;
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(gen);
            double acc = 0.0;
            for (long i = 0; i < n; ++i) {
                acc += dist2(i);
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(gen);
        }
        res.centroids.row(c) = vectors.row(pick);
        for (long i = 0; i < n; ++i)
            dist2(i) = std::min(dist2(i), (vectors.row(i) - res.centroids.row(c)).squaredNorm());
    }

    res.assignment.assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment step
        double objective = 0.0;
        for (long i = 0; i < n; ++i) {
            int c = nearest_centroid(vectors.row(i), res.centroids);
            res.assignment[static_cast<std::size_t>(i)] = c;
            objective += (vectors.row(i) - res.centroids.row(c)).squaredNorm();
        }
        res.objective = objective;
        res.objective_trace.push_back(objective);

        // update step
        Mat sums = Mat::Zero(C, vectors.cols());
        std::vector<long> counts(static_cast<std::size_t>(C), 0);
        for (long i = 0; i < n; ++i) {
            sums.row(res.assignment[static_cast<std::size_t>(i)]) += vectors.row(i);
            ++counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])];
        }
        double max_shift = 0.0;
        for (int c = 0; c < C; ++c) {
            Eigen::RowVectorXd updated;
            if (counts[static_cast<std::size_t>(c)] > 0) {
                updated = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                // re-seed the empty cluster from the farthest point
                long far = 0;
                double far_d = -1.0;
                for (long i = 0; i < n; ++i) {
                    double d = (vectors.row(i) -
                                res.centroids.row(res.assignment[static_cast<std::size_t>(i)]))
                                   .squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                updated = vectors.row(far);
            }
            max_shift = std::max(max_shift, (updated - res.centroids.row(c)).norm());
            res.centroids.row(c) = updated;
        }
        if (max_shift < tol) break;
    }

    // final assignment against the settled centroids
    double objective = 0.0;
    for (long i = 0; i < n; ++i) {
        int c = nearest_centroid(vectors.row(i), res.centroids);
        res.assignment[static_cast<std::size_t>(i)] = c;
        objective += (vectors.row(i) - res.centroids.row(c)).squaredNorm();
    }
    res.objective = objective;
    return res;
}

ViewCodebook fit_pq(const Mat& view_embeddings, int k, int C, uint64_t seed) {
    const long de = view_embeddings.cols();
    if (k < 1) throw Error("fit_pq: k must be >= 1");
    if (de % k != 0)
        throw Error("fit_pq: d_e=" + std::to_string(de) + " not divisible by k=" + std::to_string(k));
    const long w = de / k;
    ViewCodebook view;
    view.levels.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        Mat sub = view_embeddings.middleCols(j * w, w);
        view.levels.push_back(fit_kmeans(sub, C, hash_combine(seed, 1000u + j)).centroids);
    }
    return view;
}

ViewCodebook fit_rq(const Mat& view_embeddings, int k, int C, uint64_t seed) {
    if (k < 1) throw Error("fit_rq: k must be >= 1");
    ViewCodebook view;
    Mat residual = view_embeddings;
    for (int j = 0; j < k; ++j) {
        Mat centroids;
        if (j == 0) {
            centroids = fit_kmeans(residual, C, hash_combine(seed, 2000u + j)).centroids;
        } else {
            // Levels after the first reserve row 0 as the zero centroid, so
            // quantizing a residual can never grow its norm (the "keep the
            // residual" code is always available).
            centroids = Mat::Zero(C, residual.cols());
            if (C > 1)
                centroids.bottomRows(C - 1) =
                    fit_kmeans(residual, C - 1, hash_combine(seed, 2000u + j)).centroids;
        }
        view.levels.push_back(centroids);
        for (long i = 0; i < residual.rows(); ++i) {
            int c = nearest_centroid(residual.row(i), centroids);
            residual.row(i) -= centroids.row(c);
        }
    }
    return view;
}

Codebook fit_codebook(const EmbeddingMap& raw, QuantMethod method, int k, int C, uint64_t seed) {
    if (raw.empty()) throw Error("fit_codebook: empty corpus");
    const long m = raw.begin()->second.rows();
    const long de = raw.begin()->second.cols();
    Codebook cb;
    cb.method = method;
    cb.m = static_cast<int>(m);
    cb.k = k;
    cb.C = C;
    cb.d_e = static_cast<int>(de);
    cb.w = method == QuantMethod::PQ ? static_cast<int>(de) / k : static_cast<int>(de);

    for (long v = 0; v < m; ++v) {
        Mat rows(static_cast<long>(raw.size()), de);
        long i = 0;
        for (const auto& [id, emb] : raw) rows.row(i++) = emb.row(v);
        uint64_t view_seed = hash_combine(seed, static_cast<uint64_t>(v));
        cb.views.push_back(method == QuantMethod::PQ ? fit_pq(rows, k, C, view_seed)
                                                     : fit_rq(rows, k, C, view_seed));
    }
    return cb;
}

std::vector<int> assign_view_codes(const Eigen::VectorXd& embedding, const ViewCodebook& view,
                                   QuantMethod method) {
    std::vector<int> codes;
    codes.reserve(view.levels.size());
    if (method == QuantMethod::PQ) {
        const long w = view.levels.front().cols();
        for (std::size_t j = 0; j < view.levels.size(); ++j) {
            Eigen::RowVectorXd sub = embedding.segment(static_cast<long>(j) * w, w).transpose();
            codes.push_back(nearest_centroid(sub, view.levels[j]));
        }
    } else {
        Eigen::RowVectorXd residual = embedding.transpose();
        for (const auto& level : view.levels) {
            int c = nearest_centroid(residual, level);
            codes.push_back(c);
            residual -= level.row(c);
        }
    }
    return codes;
}

CodeMap assign_codes(const EmbeddingMap& raw, const Codebook& codebook) {
    CodeMap out;
    for (const auto& [id, emb] : raw) {
        if (emb.rows() != codebook.m || emb.cols() != codebook.d_e)
            throw Error("assign_codes: embedding shape mismatch for item " + id);
        CodeTuple tuple;
        tuple.item_id = id;
        tuple.codes.reserve(static_cast<std::size_t>(codebook.n_codes()));
        for (int v = 0; v < codebook.m; ++v) {
            auto view_codes = assign_view_codes(emb.row(v).transpose(),
                                                codebook.views[static_cast<std::size_t>(v)],
                                                codebook.method);
            tuple.codes.insert(tuple.codes.end(), view_codes.begin(), view_codes.end());
        }
        out.emplace(id, std::move(tuple));
    }
    return out;
}

Eigen::VectorXd reconstruct_view(const std::vector<int>& codes, const ViewCodebook& view,
                                 QuantMethod method) {
    if (method == QuantMethod::PQ) {
        const long w = view.levels.front().cols();
        Eigen::VectorXd out(static_cast<long>(view.levels.size()) * w);
        for (std::size_t j = 0; j < view.levels.size(); ++j)
            out.segment(static_cast<long>(j) * w, w) =
                view.levels[j].row(codes[j]).transpose();
        return out;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(view.levels.front().cols());
    for (std::size_t j = 0; j < view.levels.size(); ++j)
        out += view.levels[j].row(codes[j]).transpose();
    return out;
}

CodeMap random_codes(const std::vector<std::string>& items, int m, int k, int C, uint64_t seed) {
    if (C < 1) throw Error("random_codes: C must be >= 1");
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> pick(0, C - 1);
    CodeMap out;
    for (const auto& id : items) {
        CodeTuple tuple;
        tuple.item_id = id;
        tuple.codes.reserve(static_cast<std::size_t>(m) * k);
        for (int i = 0; i < m * k; ++i) tuple.codes.push_back(pick(gen));
        out.emplace(id, std::move(tuple));
    }
    return out;
}

}  // namespace ccfrec
