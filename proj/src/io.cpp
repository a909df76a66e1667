#include "ccfrec/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ccfrec {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

Config Config::defaults() {
    Config c;
    c.kv_ = {
        {"seed", "42"},
        {"corpus.k_core", "5"},
        {"corpus.max_len", "20"},
        {"corpus.max_tokens", "512"},
        {"enc.d_e", "768"},
        {"model.d", "128"},
        {"model.heads", "2"},
        {"model.sfm_layers", "2"},
        {"model.backbone_layers", "2"},
        {"model.ffn", "512"},
        {"quant.method", "pq"},
        {"quant.k", "4"},
        {"quant.C", "256"},
        {"loss.tau", "0.07"},
        {"loss.rho", "0.5"},
        {"loss.alpha", "0.2"},
        {"loss.beta", "0.2"},
        {"loss.negatives", "in-batch"},
        {"loss.uniform_k", "100"},
        {"train.lr", "0.001"},
        {"train.dropout", "0.2"},
        {"train.batch", "256"},
        {"train.max_epochs", "200"},
        {"train.patience", "10"},
        {"eval.exclude_seen", "true"},
        {"ablation", ""},
        {"synth.topics", "8"},
        {"synth.items_per_topic", "40"},
        {"synth.users", "2000"},
        {"synth.mean_len", "9"},
        {"synth.p_stay", "0.8"},
    };
    return c;
}

Config Config::load(const fs::path& path) {
    Config c = defaults();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }
bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string Config::get_str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing key: " + key);
    return it->second;
}

int Config::get_int(const std::string& key) const {
    try {
        return std::stoi(get_str(key));
    } catch (const std::invalid_argument&) {
        throw ConfigError("key " + key + " is not an integer");
    }
}

double Config::get_double(const std::string& key) const {
    try {
        return std::stod(get_str(key));
    } catch (const std::invalid_argument&) {
        throw ConfigError("key " + key + " is not a number");
    }
}

bool Config::get_bool(const std::string& key) const {
    std::string v = get_str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key " + key + " is not a boolean");
}

uint64_t Config::get_u64(const std::string& key) const {
    return std::stoull(get_str(key));
}

std::string Config::canonical(const std::vector<std::string>& keys) const {
    std::vector<std::string> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (const auto& k : sorted) out += k + "=" + get_str(k) + "\n";
    return out;
}

std::string Config::canonical_all() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
    return out;
}

void Config::save(const fs::path& path) const {
    std::ofstream out(path);
    out << canonical_all();
}

uint64_t file_content_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError(path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64(ss.str());
}

// ---------------------------------------------------------------------------
// Low-level binary helpers
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw Error("truncated artifact (u32)");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw Error("truncated artifact (u64)");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw Error("truncated artifact (string)");
    return s;
}

void put_mat_f32(std::ostream& out, const Mat& m) {
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) {
            float f = static_cast<float>(m(r, c));
            out.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
}

Mat get_mat_f32(std::istream& in, long rows, long cols) {
    Mat m(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) {
            float f;
            in.read(reinterpret_cast<char*>(&f), sizeof(float));
            if (!in) throw Error("truncated artifact (f32 matrix)");
            m(r, c) = static_cast<double>(f);
        }
    return m;
}

void put_mat_f64(std::ostream& out, const Mat& m) {
    for (long r = 0; r < m.rows(); ++r)
        out.write(reinterpret_cast<const char*>(m.row(r).eval().data()),
                  static_cast<std::streamsize>(sizeof(double) * m.cols()));
}

Mat get_mat_f64(std::istream& in, long rows, long cols) {
    Mat m(rows, cols);
    std::vector<double> buf(static_cast<std::size_t>(cols));
    for (long r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(sizeof(double) * cols));
        if (!in) throw Error("truncated artifact (f64 matrix)");
        for (long c = 0; c < cols; ++c) m(r, c) = buf[static_cast<std::size_t>(c)];
    }
    return m;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError(path.string());
    return in;
}

void expect_magic(std::istream& in, const char* magic, const fs::path& path) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0)
        throw Error(path.string() + ": bad magic, not a " + std::string(magic) + " artifact");
}

}  // namespace

// ---------------------------------------------------------------------------
// Text artifacts
// ---------------------------------------------------------------------------

std::string text_header(const std::string& kind, uint64_t config_hash) {
    return "# ccfrec " + kind + " v" + std::to_string(kFormatVersion) + " cfg=" +
           hex64(config_hash);
}

std::optional<uint64_t> read_text_header(const fs::path& path, const std::string& kind) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    std::string prefix = "# ccfrec " + kind + " v" + std::to_string(kFormatVersion) + " cfg=";
    if (line.rfind(prefix, 0) != 0) return std::nullopt;
    return std::stoull(line.substr(prefix.size()), nullptr, 16);
}

void write_items_file(const fs::path& path, const std::vector<Item>& items,
                      const std::vector<std::string>& fields, uint64_t config_hash) {
    auto out = open_out(path);
    out << text_header("items", config_hash) << "\n";
    for (const auto& item : items) {
        json rec;
        rec["item_id"] = item.item_id;
        for (std::size_t i = 0; i < fields.size(); ++i) rec[fields[i]] = item.attributes[i];
        out << rec.dump() << "\n";
    }
}

void write_interactions_file(const fs::path& path, const std::vector<Interaction>& interactions,
                             uint64_t config_hash) {
    auto out = open_out(path);
    out << text_header("interactions", config_hash) << "\n";
    for (const auto& r : interactions)
        out << r.user_id << '\t' << r.item_id << '\t' << r.timestamp << "\n";
}

void write_codes_file(const fs::path& path, const CodeMap& codes, uint64_t config_hash) {
    auto out = open_out(path);
    out << text_header("codes", config_hash) << "\n";
    for (const auto& [id, tuple] : codes) {
        out << id << '\t';
        for (std::size_t i = 0; i < tuple.codes.size(); ++i) {
            if (i) out << ',';
            out << tuple.codes[i];
        }
        out << "\n";
    }
}

CodeMap read_codes_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError(path.string());
    CodeMap out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error("malformed codes line: " + line);
        CodeTuple tuple;
        tuple.item_id = line.substr(0, tab);
        std::stringstream ss(line.substr(tab + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) tuple.codes.push_back(std::stoi(tok));
        out.emplace(tuple.item_id, std::move(tuple));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedding cache
// ---------------------------------------------------------------------------

void write_embedding_cache(const fs::path& path, const EmbeddingMap& embeddings,
                           uint64_t config_hash) {
    if (embeddings.empty()) throw Error("refusing to write empty embedding cache");
    auto out = open_out(path);
    out.write("CCEM", 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(embeddings.size()));
    put_u32(out, static_cast<uint32_t>(embeddings.begin()->second.rows()));
    put_u32(out, static_cast<uint32_t>(embeddings.begin()->second.cols()));
    put_u64(out, config_hash);
    for (const auto& [id, emb] : embeddings) put_string(out, id);
    for (const auto& [id, emb] : embeddings) put_mat_f32(out, emb);
}

EmbeddingMap read_embedding_cache(const fs::path& path) {
    auto in = open_in(path);
    expect_magic(in, "CCEM", path);
    uint32_t version = get_u32(in);
    if (version != kFormatVersion) throw Error("unsupported embedding cache version");
    uint32_t count = get_u32(in);
    uint32_t m = get_u32(in);
    uint32_t de = get_u32(in);
    get_u64(in);  // config hash
    std::vector<std::string> ids(count);
    for (auto& id : ids) id = get_string(in);
    EmbeddingMap out;
    for (const auto& id : ids) out.emplace(id, get_mat_f32(in, m, de));
    return out;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

void write_pca(const fs::path& path, const PcaTransform& pca, uint64_t config_hash) {
    auto out = open_out(path);
    out.write("CCPC", 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(pca.mean.size()));
    put_u32(out, static_cast<uint32_t>(pca.components.cols()));
    put_u32(out, static_cast<uint32_t>(pca.effective_rank));
    put_u64(out, config_hash);
    put_mat_f64(out, pca.mean.transpose());
    put_mat_f64(out, pca.components);
    put_mat_f64(out, pca.explained_ratio.transpose());
}

PcaTransform read_pca(const fs::path& path) {
    auto in = open_in(path);
    expect_magic(in, "CCPC", path);
    if (get_u32(in) != kFormatVersion) throw Error("unsupported pca version");
    uint32_t de = get_u32(in);
    uint32_t d = get_u32(in);
    uint32_t rank = get_u32(in);
    get_u64(in);
    PcaTransform pca;
    pca.mean = get_mat_f64(in, 1, de).row(0).transpose();
    pca.components = get_mat_f64(in, de, d);
    pca.explained_ratio = get_mat_f64(in, 1, d).row(0).transpose();
    pca.effective_rank = static_cast<int>(rank);
    return pca;
}

// ---------------------------------------------------------------------------
// Codebook
// ---------------------------------------------------------------------------

void write_codebook(const fs::path& path, const Codebook& cb, uint64_t config_hash) {
    auto out = open_out(path);
    out.write("CCCB", 4);
    put_u32(out, kFormatVersion);
    put_u32(out, cb.method == QuantMethod::PQ ? 0u : 1u);
    put_u32(out, static_cast<uint32_t>(cb.m));
    put_u32(out, static_cast<uint32_t>(cb.k));
    put_u32(out, static_cast<uint32_t>(cb.C));
    put_u32(out, static_cast<uint32_t>(cb.w));
    put_u32(out, static_cast<uint32_t>(cb.d_e));
    put_u64(out, config_hash);
    for (const auto& view : cb.views)
        for (const auto& level : view.levels) put_mat_f32(out, level);
}

Codebook read_codebook(const fs::path& path) {
    auto in = open_in(path);
    expect_magic(in, "CCCB", path);
    if (get_u32(in) != kFormatVersion) throw Error("unsupported codebook version");
    Codebook cb;
    cb.method = get_u32(in) == 0 ? QuantMethod::PQ : QuantMethod::RQ;
    cb.m = static_cast<int>(get_u32(in));
    cb.k = static_cast<int>(get_u32(in));
    cb.C = static_cast<int>(get_u32(in));
    cb.w = static_cast<int>(get_u32(in));
    cb.d_e = static_cast<int>(get_u32(in));
    get_u64(in);
    for (int v = 0; v < cb.m; ++v) {
        ViewCodebook view;
        for (int j = 0; j < cb.k; ++j) view.levels.push_back(get_mat_f32(in, cb.C, cb.w));
        cb.views.push_back(std::move(view));
    }
    return cb;
}

// ---------------------------------------------------------------------------
// Representation cache
// ---------------------------------------------------------------------------

void write_rep_cache(const fs::path& path, const Mat& reps,
                     const std::vector<std::string>& vocab, uint64_t config_hash) {
    if (reps.rows() != static_cast<long>(vocab.size()))
        throw Error("rep cache: vocab size mismatch");
    auto out = open_out(path);
    out.write("CCRP", 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(reps.rows()));
    put_u32(out, static_cast<uint32_t>(reps.cols()));
    put_u64(out, config_hash);
    for (const auto& id : vocab) put_string(out, id);
    put_mat_f32(out, reps);
}

Mat read_rep_cache(const fs::path& path, std::vector<std::string>* vocab) {
    auto in = open_in(path);
    expect_magic(in, "CCRP", path);
    if (get_u32(in) != kFormatVersion) throw Error("unsupported rep cache version");
    uint32_t rows = get_u32(in);
    uint32_t cols = get_u32(in);
    get_u64(in);
    std::vector<std::string> ids(rows);
    for (auto& id : ids) id = get_string(in);
    if (vocab) *vocab = ids;
    return get_mat_f32(in, rows, cols);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

Checkpoint snapshot_params(const ad::ParamStore& params, long adam_step, int epoch,
                           double best_val) {
    Checkpoint ckpt;
    for (const ad::Param* p : params.all()) {
        ckpt.values[p->name] = p->value;
        ckpt.adam_m[p->name] = p->adam_m;
        ckpt.adam_v[p->name] = p->adam_v;
    }
    ckpt.adam_step = adam_step;
    ckpt.epoch = epoch;
    ckpt.best_val_ndcg10 = best_val;
    return ckpt;
}

void restore_params(const Checkpoint& ckpt, ad::ParamStore& params, bool partial) {
    for (ad::Param* p : params.all()) {
        auto it = ckpt.values.find(p->name);
        if (it == ckpt.values.end()) {
            if (partial) continue;
            throw Error("checkpoint missing tensor: " + p->name);
        }
        if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
            throw Error("checkpoint shape mismatch for " + p->name);
        p->value = it->second;
        p->adam_m = ckpt.adam_m.at(p->name);
        p->adam_v = ckpt.adam_v.at(p->name);
    }
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt, uint64_t config_hash) {
    auto out = open_out(path);
    out.write("CCKP", 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(ckpt.values.size()));
    put_u64(out, config_hash);
    put_u64(out, static_cast<uint64_t>(ckpt.adam_step));
    put_u32(out, static_cast<uint32_t>(ckpt.epoch));
    double best = ckpt.best_val_ndcg10;
    out.write(reinterpret_cast<const char*>(&best), sizeof(double));
    for (const auto& [name, value] : ckpt.values) {
        put_string(out, name);
        put_u32(out, static_cast<uint32_t>(value.rows()));
        put_u32(out, static_cast<uint32_t>(value.cols()));
        put_mat_f64(out, value);
        put_mat_f64(out, ckpt.adam_m.at(name));
        put_mat_f64(out, ckpt.adam_v.at(name));
    }
}

Checkpoint load_checkpoint(const fs::path& path) {
    auto in = open_in(path);
    expect_magic(in, "CCKP", path);
    if (get_u32(in) != kFormatVersion) throw Error("unsupported checkpoint version");
    uint32_t count = get_u32(in);
    get_u64(in);  // config hash
    Checkpoint ckpt;
    ckpt.adam_step = static_cast<long>(get_u64(in));
    ckpt.epoch = static_cast<int>(get_u32(in));
    in.read(reinterpret_cast<char*>(&ckpt.best_val_ndcg10), sizeof(double));
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(in);
        uint32_t rows = get_u32(in);
        uint32_t cols = get_u32(in);
        ckpt.values[name] = get_mat_f64(in, rows, cols);
        ckpt.adam_m[name] = get_mat_f64(in, rows, cols);
        ckpt.adam_v[name] = get_mat_f64(in, rows, cols);
    }
    return ckpt;
}

std::optional<uint64_t> artifact_config_hash(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    {
        std::ifstream in(path, std::ios::binary);
        char magic[4];
        in.read(magic, 4);
        if (in && (std::memcmp(magic, "CCEM", 4) == 0 || std::memcmp(magic, "CCPC", 4) == 0 ||
                   std::memcmp(magic, "CCCB", 4) == 0 || std::memcmp(magic, "CCRP", 4) == 0 ||
                   std::memcmp(magic, "CCKP", 4) == 0)) {
            get_u32(in);  // version
            uint32_t skip_u32 = 0;
            if (std::memcmp(magic, "CCEM", 4) == 0) skip_u32 = 3;
            if (std::memcmp(magic, "CCPC", 4) == 0) skip_u32 = 3;
            if (std::memcmp(magic, "CCCB", 4) == 0) skip_u32 = 6;
            if (std::memcmp(magic, "CCRP", 4) == 0) skip_u32 = 2;
            if (std::memcmp(magic, "CCKP", 4) == 0) skip_u32 = 1;
            for (uint32_t i = 0; i < skip_u32; ++i) get_u32(in);
            return get_u64(in);
        }
    }
    // text artifacts
    for (const char* kind : {"items", "interactions", "codes", "metrics"}) {
        if (auto h = read_text_header(path, kind)) return h;
    }
    return std::nullopt;
}

}  // namespace ccfrec
