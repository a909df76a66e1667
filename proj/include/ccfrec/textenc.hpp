#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ccfrec/common.hpp"
#include "ccfrec/corpus.hpp"

namespace ccfrec {

using Mat = Eigen::MatrixXd;

// Maps one text to one d_e-dimensional vector, deterministically.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd encode(const std::string& text) const = 0;
};

// Test/desk encoder: each whitespace token is expanded into a seeded Gaussian
// vector keyed by its hash, and the token vectors are mean-pooled. Texts that
// share vocabulary therefore land near each other, which is what the
// downstream quantizer needs. The empty string maps to its own fixed vector.
class HashingTextEncoder : public TextEncoder {
public:
    HashingTextEncoder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {}
    int dim() const override { return dim_; }
    Eigen::VectorXd encode(const std::string& text) const override;

private:
    Eigen::VectorXd token_vector(std::string_view token) const;
    int dim_;
    uint64_t seed_;
};

// Per item: m x d_e matrix, row i = embedding of attribute i.
using RawEmbeddingSet = Mat;
using EmbeddingMap = std::map<std::string, RawEmbeddingSet>;

// Encodes every attribute of every item. Aborts naming the offending item and
// field if the encoder throws.
EmbeddingMap encode_corpus(const std::vector<Item>& items, const TextEncoder& encoder);

// Corpus-wide linear projection fitted on the pooled attribute rows.
struct PcaTransform {
    Eigen::VectorXd mean;              // d_e
    Mat components;                    // d_e x d, orthonormal columns
    Eigen::VectorXd explained_ratio;   // d
    int effective_rank = 0;            // nonzero singular values observed
};

// Standard PCA fit. Requires n_rows >= d and d <= d_e. If the data has rank
// below d the remaining components are an arbitrary orthonormal completion
// (effective_rank tells the caller to warn).
PcaTransform fit_pca(const Mat& rows, int d);

// Z = (raw - mean) * components, shape m x d.
Mat project(const Mat& raw, const PcaTransform& pca);

}  // namespace ccfrec
