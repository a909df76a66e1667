#include "ccfrec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace ccfrec {

using nlohmann::json;

const std::vector<std::string>& default_attribute_fields() {
    static const std::vector<std::string> fields = {"title", "brand", "categories",
                                                    "features", "description"};
    return fields;
}

namespace {

std::string flatten_field(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) {
            if (!out.empty()) out += ", ";
            if (e.is_string())
                out += e.get<std::string>();
            else
                out += e.dump();
        }
        return out;
    }
    if (v.is_null()) return "";
    return v.dump();
}

}  // namespace

IngestResult ingest_items(const std::string& path,
                          const std::vector<std::string>& field_names,
                          std::size_t max_tokens) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open items file: " + path);
    IngestResult result;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        json rec = json::parse(line);
        if (!rec.contains("item_id") || !rec["item_id"].is_string() ||
            rec["item_id"].get<std::string>().empty()) {
            ++result.rejected_records;
            continue;
        }
        Item item;
        item.item_id = rec["item_id"].get<std::string>();
        if (!seen.insert(item.item_id).second) throw DuplicateItemError(item.item_id);
        item.attributes.reserve(field_names.size());
        for (const auto& f : field_names) {
            std::string text = rec.contains(f) ? flatten_field(rec[f]) : "";
            item.attributes.push_back(truncate_tokens(text, max_tokens));
        }
        result.items.push_back(std::move(item));
    }
    return result;
}

std::vector<Interaction> read_interactions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open interactions file: " + path);
    std::vector<Interaction> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Interaction r;
        std::string ts;
        if (!std::getline(ss, r.user_id, '\t') || !std::getline(ss, r.item_id, '\t') ||
            !std::getline(ss, ts, '\t'))
            throw Error("malformed interaction line: " + line);
        r.timestamp = std::stoll(ts);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Interaction> k_core_filter(std::vector<Interaction> interactions, int k) {
    if (k < 1) throw Error("k_core_filter requires k >= 1");
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, int> user_count, item_count;
        for (const auto& r : interactions) {
            ++user_count[r.user_id];
            ++item_count[r.item_id];
        }
        std::vector<Interaction> kept;
        kept.reserve(interactions.size());
        for (auto& r : interactions) {
            if (user_count[r.user_id] >= k && item_count[r.item_id] >= k)
                kept.push_back(std::move(r));
            else
                changed = true;
        }
        interactions = std::move(kept);
    }
    return interactions;
}

std::vector<InteractionSequence> group_sequences(const std::vector<Interaction>& interactions) {
    std::unordered_map<std::string, std::vector<std::pair<long long, const Interaction*>>> by_user;
    std::vector<std::string> user_order;
    for (const auto& r : interactions) {
        auto [it, inserted] = by_user.try_emplace(r.user_id);
        if (inserted) user_order.push_back(r.user_id);
        it->second.emplace_back(r.timestamp, &r);
    }
    std::sort(user_order.begin(), user_order.end());
    std::vector<InteractionSequence> out;
    out.reserve(user_order.size());
    for (const auto& uid : user_order) {
        auto& recs = by_user[uid];
        // ties keep input order
        std::stable_sort(recs.begin(), recs.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        InteractionSequence seq;
        seq.user_id = uid;
        for (const auto& [ts, rec] : recs) {
            seq.items.push_back(rec->item_id);
            seq.timestamps.push_back(ts);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

SplitDataset build_splits(const std::vector<Interaction>& interactions, int max_len) {
    if (max_len < 1) throw Error("build_splits requires max_len >= 1");
    SplitDataset ds;

    std::set<std::string> vocab_set;
    for (const auto& r : interactions) vocab_set.insert(r.item_id);
    ds.item_vocab.assign(vocab_set.begin(), vocab_set.end());
    std::unordered_map<std::string, int> item_index;
    for (std::size_t i = 0; i < ds.item_vocab.size(); ++i)
        item_index[ds.item_vocab[i]] = static_cast<int>(i);

    auto sequences = group_sequences(interactions);

    auto make_example = [&](const std::vector<int>& full, int target_pos, int user) {
        SplitExample ex;
        ex.user = user;
        ex.target = full[static_cast<std::size_t>(target_pos)];
        int start = std::max(0, target_pos - max_len);
        ex.prefix.assign(full.begin() + start, full.begin() + target_pos);
        return ex;
    };

    for (const auto& seq : sequences) {
        if (seq.items.size() < 3) {
            ++ds.excluded_users;
            continue;
        }
        int user = static_cast<int>(ds.user_ids.size());
        ds.user_ids.push_back(seq.user_id);
        std::vector<int> full;
        full.reserve(seq.items.size());
        for (const auto& id : seq.items) full.push_back(item_index.at(id));
        int n = static_cast<int>(full.size());
        ds.test.push_back(make_example(full, n - 1, user));
        ds.valid.push_back(make_example(full, n - 2, user));
        // Train targets are v2..v_{n-2}; a user with exactly three
        // interactions still contributes the single example (v1) -> v2.
        int last_train_target = std::max(1, n - 3);
        for (int t = 1; t <= last_train_target; ++t)
            ds.train.push_back(make_example(full, t, user));
    }
    return ds;
}

}  // namespace ccfrec
