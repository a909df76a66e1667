#pragma once

#include <map>
#include <string>
#include <vector>

#include "ccfrec/common.hpp"

namespace ccfrec {

// Item metadata: an id plus m attribute texts in a fixed field order shared
// by the whole corpus. Missing fields are empty strings.
struct Item {
    std::string item_id;
    std::vector<std::string> attributes;  // aligned with the corpus field order
};

// Default attribute fields, in order.
const std::vector<std::string>& default_attribute_fields();

struct Interaction {
    std::string user_id;
    std::string item_id;
    long long timestamp = 0;
};

// One user's chronologically ordered history.
struct InteractionSequence {
    std::string user_id;
    std::vector<std::string> items;
    std::vector<long long> timestamps;  // non-decreasing
};

// One supervised example: the prefix seen so far and the next item.
struct SplitExample {
    std::vector<int> prefix;  // item indices into item_vocab, oldest first
    int target = -1;
    int user = -1;  // index into user ids, for history exclusion at eval time
};

struct SplitDataset {
    std::vector<SplitExample> train;
    std::vector<SplitExample> valid;
    std::vector<SplitExample> test;
    std::vector<std::string> item_vocab;  // sorted; index = model item id
    std::vector<std::string> user_ids;
    int excluded_users = 0;  // users with fewer than 3 interactions
};

struct IngestResult {
    std::vector<Item> items;
    int rejected_records = 0;  // records missing item_id
};

// Reads line-delimited JSON records {"item_id": ..., <fields>...}. Attribute
// values may be strings or arrays of strings (joined by ", "). Each attribute
// is truncated to `max_tokens` whitespace tokens. Lines starting with '#' are
// skipped. A duplicate item_id rejects the whole file.
IngestResult ingest_items(const std::string& path,
                          const std::vector<std::string>& field_names = default_attribute_fields(),
                          std::size_t max_tokens = 512);

// Reads tab-separated `user_id \t item_id \t timestamp` lines.
std::vector<Interaction> read_interactions(const std::string& path);

// Iteratively removes users and items with fewer than k interactions until a
// fixed point; the survivors form the unique maximal k-core. Input order is
// preserved for the surviving records.
std::vector<Interaction> k_core_filter(std::vector<Interaction> interactions, int k);

// Groups interactions per user (stable-sorted by timestamp, ties keep input
// order) and produces leave-one-out train/valid/test splits. Prefixes keep
// the most recent `max_len` items. Users with fewer than 3 interactions are
// excluded and counted.
SplitDataset build_splits(const std::vector<Interaction>& interactions, int max_len = 20);

// Per-user chronological sequences, after the same grouping/sorting rule as
// build_splits but without the 3-interaction cutoff.
std::vector<InteractionSequence> group_sequences(const std::vector<Interaction>& interactions);

}  // namespace ccfrec
