#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ccfrec {

// Error taxonomy. Every failure the pipeline can raise on purpose derives
// from Error so the CLI can map it to an exit status.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DuplicateItemError : Error {
    explicit DuplicateItemError(const std::string& id)
        : Error("duplicate item_id: " + id) {}
};

struct TooFewVectorsError : Error {
    TooFewVectorsError(long n, long c)
        : Error("k-means needs n >= C, got n=" + std::to_string(n) +
                " C=" + std::to_string(c)) {}
};

struct DegenerateRepError : Error {
    explicit DegenerateRepError(const std::string& where)
        : Error("zero-norm representation in " + where) {}
};

struct EmptySequenceError : Error {
    EmptySequenceError() : Error("empty interaction sequence") {}
};

struct NonFiniteError : Error {
    explicit NonFiniteError(const std::string& where)
        : Error("non-finite values in " + where) {}
};

struct MissingArtifactError : Error {
    explicit MissingArtifactError(const std::string& what)
        : Error("missing prerequisite artifact: " + what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

// 64-bit FNV-1a. Used for content hashes of artifacts and for deriving
// per-component RNG streams; not cryptographic.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the xor; good enough for stream derivation
    uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// Deterministic RNG stream derived from a root seed and a label, so that
// independent pipeline stages do not share (or perturb) each other's streams.
inline std::mt19937_64 seeded_rng(uint64_t seed, std::string_view label) {
    return std::mt19937_64(hash_combine(seed, fnv1a64(label)));
}

// Whitespace tokenizer used for attribute-text truncation and the hashing
// encoder. Splits on runs of spaces/tabs/newlines.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

// Truncate text to at most max_tokens whitespace tokens (joined by single
// spaces). Returns the input unchanged if it is already within the limit.
std::string truncate_tokens(const std::string& text, std::size_t max_tokens);

}  // namespace ccfrec
