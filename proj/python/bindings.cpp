// Python bindings for the main operations: quantization, PCA, code masking,
// the loss values, ranking metrics, and the file-based pipeline stages.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ccfrec/evaluator.hpp"
#include "ccfrec/objectives.hpp"
#include "ccfrec/pipeline.hpp"
#include "ccfrec/quantizer.hpp"
#include "ccfrec/synthetic.hpp"
#include "ccfrec/textenc.hpp"

namespace py = pybind11;
using namespace ccfrec;

namespace {

Config config_from_dict(const py::dict& overrides) {
    Config cfg = Config::defaults();
    for (auto item : overrides)
        cfg.set(py::str(item.first).cast<std::string>(), py::str(item.second).cast<std::string>());
    return cfg;
}

py::dict status_dict(const pipeline::StageStatus& st) {
    py::dict d;
    d["skipped"] = st.skipped;
    d["message"] = st.message;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "semantic-code sequential recommender core";

    py::register_exception<Error>(m, "CcfrecError");

    // ---- quantization ----
    py::class_<KMeansResult>(m, "KMeansResult")
        .def_readonly("centroids", &KMeansResult::centroids)
        .def_readonly("assignment", &KMeansResult::assignment)
        .def_readonly("objective", &KMeansResult::objective)
        .def_readonly("objective_trace", &KMeansResult::objective_trace);

    m.def("fit_kmeans", &fit_kmeans, py::arg("vectors"), py::arg("C"), py::arg("seed"),
          py::arg("max_iters") = 100, py::arg("tol") = 1e-6);

    py::class_<ViewCodebook>(m, "ViewCodebook")
        .def_readonly("levels", &ViewCodebook::levels);

    m.def("fit_pq", &fit_pq, py::arg("view_embeddings"), py::arg("k"), py::arg("C"),
          py::arg("seed"));
    m.def("fit_rq", &fit_rq, py::arg("view_embeddings"), py::arg("k"), py::arg("C"),
          py::arg("seed"));
    m.def(
        "assign_view_codes",
        [](const Eigen::VectorXd& embedding, const ViewCodebook& view, const std::string& method) {
            return assign_view_codes(embedding, view, quant_method_from_string(method));
        },
        py::arg("embedding"), py::arg("view"), py::arg("method"));
    m.def(
        "reconstruct_view",
        [](const std::vector<int>& codes, const ViewCodebook& view, const std::string& method) {
            return reconstruct_view(codes, view, quant_method_from_string(method));
        },
        py::arg("codes"), py::arg("view"), py::arg("method"));

    // ---- text embedding / PCA ----
    py::class_<HashingTextEncoder>(m, "HashingTextEncoder")
        .def(py::init<int, uint64_t>(), py::arg("dim"), py::arg("seed"))
        .def("encode", &HashingTextEncoder::encode)
        .def_property_readonly("dim", &HashingTextEncoder::dim);

    py::class_<PcaTransform>(m, "PcaTransform")
        .def_readonly("mean", &PcaTransform::mean)
        .def_readonly("components", &PcaTransform::components)
        .def_readonly("explained_ratio", &PcaTransform::explained_ratio)
        .def_readonly("effective_rank", &PcaTransform::effective_rank);

    m.def("fit_pca", &fit_pca, py::arg("rows"), py::arg("d"));
    m.def("project", &project, py::arg("raw"), py::arg("pca"));

    // ---- code masking ----
    m.def(
        "mask_codes",
        [](const std::vector<int>& codes, double rho, int C, uint64_t seed, bool bert_rule) {
            MaskResult mr = mask_codes(codes, rho, C, seed, bert_rule);
            return py::make_tuple(mr.codes, mr.mask_set);
        },
        py::arg("codes"), py::arg("rho"), py::arg("C"), py::arg("seed"),
        py::arg("bert_rule") = true);

    // ---- loss values ----
    m.def(
        "loss_ce",
        [](const Mat& user, const Mat& candidates, int target, double tau) {
            Tape t;
            return t.scalar(loss_ce_batch(t, t.constant(user), t.constant(candidates), {target},
                                          tau));
        },
        py::arg("user_rep"), py::arg("candidates"), py::arg("target"), py::arg("tau"));
    m.def(
        "loss_msa",
        [](const Mat& reps, const Mat& reps_augmented, double tau) {
            Tape t;
            return t.scalar(loss_msa(t, t.constant(reps), t.constant(reps_augmented), tau));
        },
        py::arg("reps"), py::arg("reps_augmented"), py::arg("tau"));
    m.def(
        "loss_total",
        [](double ce, double mcm, double msa, double alpha, double beta) {
            return loss_total(ce, mcm, msa, alpha, beta);
        },
        py::arg("ce"), py::arg("mcm"), py::arg("msa"), py::arg("alpha"), py::arg("beta"));

    // ---- ranking metrics ----
    m.def(
        "rank_full",
        [](const Eigen::RowVectorXd& r, const Mat& cache, const std::set<int>& exclude) {
            return rank_full(r, cache, exclude);
        },
        py::arg("user_rep"), py::arg("rep_cache"), py::arg("exclude") = std::set<int>{});
    m.def("recall_from_ranks", &recall_from_ranks, py::arg("ranks"), py::arg("k"));
    m.def("ndcg_from_ranks", &ndcg_from_ranks, py::arg("ranks"), py::arg("k"));

    // ---- synthetic corpus ----
    m.def(
        "generate_synthetic",
        [](int topics, int items_per_topic, int users, double mean_len, double p_stay,
           uint64_t seed) {
            SyntheticSpec spec{topics, items_per_topic, users, mean_len, p_stay, seed};
            SyntheticCorpus corpus = generate_synthetic(spec);
            py::list items;
            for (const auto& item : corpus.items) {
                py::dict d;
                d["item_id"] = item.item_id;
                const auto& fields = default_attribute_fields();
                for (std::size_t i = 0; i < fields.size(); ++i)
                    d[fields[i].c_str()] = item.attributes[i];
                items.append(d);
            }
            py::list interactions;
            for (const auto& r : corpus.interactions)
                interactions.append(py::make_tuple(r.user_id, r.item_id, r.timestamp));
            return py::make_tuple(items, interactions);
        },
        py::arg("topics") = 8, py::arg("items_per_topic") = 40, py::arg("users") = 2000,
        py::arg("mean_len") = 9.0, py::arg("p_stay") = 0.8, py::arg("seed") = 7);

    // ---- pipeline stages ----
    m.def(
        "run_pipeline",
        [](const std::string& stage, const fs::path& workdir, const py::dict& overrides) {
            Config cfg = config_from_dict(overrides);
            pipeline::Paths paths{workdir};
            if (stage == "synth") return status_dict(pipeline::run_synth(cfg, paths));
            if (stage == "ingest")
                return status_dict(pipeline::run_ingest(cfg, paths, paths.items_raw(),
                                                        paths.interactions_raw()));
            if (stage == "embed") return status_dict(pipeline::run_embed(cfg, paths));
            if (stage == "quantize") return status_dict(pipeline::run_quantize(cfg, paths));
            if (stage == "train") return status_dict(pipeline::run_train(cfg, paths));
            if (stage == "export-reps") return status_dict(pipeline::run_export_reps(cfg, paths));
            if (stage == "finetune-ids")
                return status_dict(pipeline::run_finetune_ids(cfg, paths));
            throw ConfigError("unknown stage: " + stage);
        },
        py::arg("stage"), py::arg("workdir"), py::arg("config") = py::dict());

    m.def(
        "run_eval",
        [](const fs::path& workdir, const std::string& split, const py::dict& overrides,
           bool finetuned) {
            Config cfg = config_from_dict(overrides);
            pipeline::Paths paths{workdir};
            std::ostringstream sink;
            MetricReport rep = pipeline::run_eval(cfg, paths, split, sink, finetuned);
            py::dict d;
            d["split"] = split;
            d["recall5"] = rep.recall5;
            d["recall10"] = rep.recall10;
            d["ndcg5"] = rep.ndcg5;
            d["ndcg10"] = rep.ndcg10;
            d["users"] = rep.users;
            return d;
        },
        py::arg("workdir"), py::arg("split") = "test", py::arg("config") = py::dict(),
        py::arg("finetuned") = false);
}
