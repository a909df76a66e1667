#pragma once

// Desk-scale synthetic corpus with planted topic structure: items within a
// topic share attribute vocabulary, and users random-walk over topics, so
// text embeddings, semantic codes, and transition statistics all cluster.

#include "ccfrec/corpus.hpp"

namespace ccfrec {

struct SyntheticSpec {
    int topics = 8;
    int items_per_topic = 40;
    int users = 2000;
    double mean_len = 9.0;  // sequence lengths are 3 + Poisson(mean_len - 3)
    double p_stay = 0.8;    // probability the next item stays in the topic
    uint64_t seed = 7;
};

struct SyntheticCorpus {
    std::vector<Item> items;
    std::vector<Interaction> interactions;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace ccfrec
