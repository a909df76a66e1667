#include "ccfrec/synthetic.hpp"

#include <random>

namespace ccfrec {

namespace {

constexpr int kTopicWords = 24;
constexpr int kTitleOptions = 8;
constexpr int kBrandOptions = 4;
constexpr int kCategoryOptions = 3;
constexpr int kFeatureOptions = 8;
constexpr int kDescriptionOptions = 8;

std::string topic_word(int topic, int w) {
    return "w" + std::to_string(topic) + "x" + std::to_string(w);
}

std::string sample_words(int topic, int count, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, kTopicWords - 1);
    std::string out;
    for (int i = 0; i < count; ++i) {
        if (i) out += ' ';
        out += topic_word(topic, pick(rng));
    }
    return out;
}

// Discrete per-topic attribute pools. Items draw one option per attribute, so
// attribute texts (and the codes quantized from them) identify items within a
// topic while still sharing the topic vocabulary.
struct TopicPools {
    std::vector<std::string> titles;
    std::vector<std::string> brands;
    std::vector<std::string> categories;
    std::vector<std::string> features;
    std::vector<std::string> descriptions;

    TopicPools(int topic, std::mt19937_64& rng) {
        for (int j = 0; j < kTitleOptions; ++j) titles.push_back(sample_words(topic, 3, rng));
        for (int j = 0; j < kBrandOptions; ++j)
            brands.push_back("brand" + std::to_string(topic) + "n" + std::to_string(j));
        for (int j = 0; j < kCategoryOptions; ++j)
            categories.push_back("cat" + std::to_string(topic) + ", cat" +
                                 std::to_string(topic) + "sub" + std::to_string(j));
        for (int j = 0; j < kFeatureOptions; ++j)
            features.push_back(sample_words(topic, 5, rng));
        for (int j = 0; j < kDescriptionOptions; ++j)
            descriptions.push_back(sample_words(topic, 8, rng));
    }

    const std::string& pick(const std::vector<std::string>& pool, std::mt19937_64& rng) const {
        std::uniform_int_distribution<int> d(0, static_cast<int>(pool.size()) - 1);
        return pool[static_cast<std::size_t>(d(rng))];
    }
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    if (spec.topics < 2) throw ConfigError("synthetic corpus needs at least 2 topics");
    if (spec.items_per_topic < 1 || spec.users < 1)
        throw ConfigError("synthetic corpus needs items and users");
    if (spec.mean_len < 3.0) throw ConfigError("mean sequence length must be >= 3");
    if (spec.p_stay < 0.0 || spec.p_stay > 1.0) throw ConfigError("p_stay must be in [0, 1]");

    SyntheticCorpus corpus;

    std::mt19937_64 item_rng = seeded_rng(spec.seed, "synthetic-items");
    for (int t = 0; t < spec.topics; ++t) {
        TopicPools pools(t, item_rng);
        for (int i = 0; i < spec.items_per_topic; ++i) {
            Item item;
            item.item_id = "it" + std::to_string(t * spec.items_per_topic + i);
            item.attributes = {
                pools.pick(pools.titles, item_rng),
                pools.pick(pools.brands, item_rng),
                pools.pick(pools.categories, item_rng),
                pools.pick(pools.features, item_rng),
                pools.pick(pools.descriptions, item_rng),
            };
            corpus.items.push_back(std::move(item));
        }
    }

    std::mt19937_64 user_rng = seeded_rng(spec.seed, "synthetic-users");
    std::poisson_distribution<int> extra_len(spec.mean_len - 3.0);
    std::uniform_int_distribution<int> topic_pick(0, spec.topics - 1);
    std::uniform_int_distribution<int> item_pick(0, spec.items_per_topic - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int u = 0; u < spec.users; ++u) {
        const std::string user_id = "u" + std::to_string(u);
        int len = 3 + extra_len(user_rng);
        int topic = topic_pick(user_rng);
        long long ts = 1700000000LL + static_cast<long long>(u);
        for (int j = 0; j < len; ++j) {
            if (j > 0 && unit(user_rng) >= spec.p_stay) {
                // jump to a uniformly chosen different topic
                int next = topic_pick(user_rng);
                while (spec.topics > 1 && next == topic) next = topic_pick(user_rng);
                topic = next;
            }
            int item = topic * spec.items_per_topic + item_pick(user_rng);
            corpus.interactions.push_back(
                {user_id, "it" + std::to_string(item), ts + 86400LL * j});
        }
    }
    return corpus;
}

}  // namespace ccfrec
