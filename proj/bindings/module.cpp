#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "countvqa/counters.hpp"
#include "countvqa/data.hpp"
#include "countvqa/geometry.hpp"
#include "countvqa/language.hpp"
#include "countvqa/metrics.hpp"
#include "countvqa/synth.hpp"
#include "countvqa/trainer.hpp"

namespace py = pybind11;
using namespace cvqa;

namespace {

Box box_from_tuple(const std::vector<double>& b) {
    detail::require(b.size() == 4, "box must be [x1, y1, x2, y2]");
    return Box{b[0], b[1], b[2], b[3]};
}

SceneRecord scene_from_arrays(const std::vector<std::vector<double>>& boxes,
                              const std::vector<std::vector<double>>& features, double width,
                              double height) {
    detail::require(boxes.size() == features.size(),
                    "boxes and features must have equal length");
    SceneRecord s;
    s.image_id = "py";
    s.width = width;
    s.height = height;
    std::size_t d_v = features.empty() ? 0 : features[0].size();
    s.features = Tensor({features.size(), d_v});
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        s.boxes.push_back(box_from_tuple(boxes[i]));
        detail::require(features[i].size() == d_v, "ragged feature rows");
        for (std::size_t j = 0; j < d_v; ++j) s.features.at(i, j) = features[i][j];
    }
    return s;
}

/// A trained counting model restored from a run directory's resolved config
/// and checkpoint, exposed for interactive use.
class PyModel {
public:
    PyModel(const std::string& config_path, const std::string& checkpoint_path) {
        cfg_ = load_config(config_path);
        apply_profile(cfg_);
        data_ = prepare_data(cfg_);
        model_ = build_model(cfg_, data_);
        load_checkpoint(model_->params(), checkpoint_path);
    }

    py::dict count(const std::string& question, const std::vector<std::vector<double>>& boxes,
                   const std::vector<std::vector<double>>& features, double width,
                   double height) {
        SceneRecord scene = scene_from_arrays(boxes, features, width, height);
        CountPrediction cp = model_->predict(scene, tokenize(question));
        py::dict out;
        out["count"] = cp.count;
        out["raw"] = cp.raw;
        out["weights"] = cp.weights;
        out["selected"] = cp.selected;
        if (!cp.probs.empty()) out["probs"] = cp.probs;
        return out;
    }

    std::string kind() const { return model_->kind(); }

private:
    RunConfig cfg_;
    PreparedData data_;
    std::unique_ptr<CountingModel> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Interpretable counting for visual question answering";

    m.def("tokenize", &tokenize, py::arg("text"),
          "Lowercase, strip punctuation, split on whitespace");

    m.def(
        "filter_question",
        [](const std::string& question, const std::string& answer) {
            return std::string(filter_reason_name(filter_howmany(question, answer)));
        },
        py::arg("question"), py::arg("answer"),
        "Counting-question filter decision: KEEP or the rejection reason");

    m.def(
        "extract_subject",
        [](const std::string& question) { return extract_subject(tokenize(question)); },
        py::arg("question"), "Heuristic counting subject of a question");

    m.def(
        "iou",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return iou(box_from_tuple(a), box_from_tuple(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "overlap_frac",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return overlap_frac(box_from_tuple(a), box_from_tuple(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "pair_features",
        [](const std::vector<double>& a, const std::vector<double>& b, double w, double h) {
            auto f = pair_features(box_from_tuple(a), box_from_tuple(b), w, h);
            return std::vector<double>(f.begin(), f.end());
        },
        py::arg("a"), py::arg("b"), py::arg("image_width"), py::arg("image_height"));

    m.def("vqa_accuracy", &vqa_accuracy, py::arg("predicted"), py::arg("answers"),
          "Leave-one-out VQA accuracy against ten human answers");

    m.def(
        "rmse",
        [](const std::vector<int>& p, const std::vector<int>& g) { return rmse(p, g); },
        py::arg("predictions"), py::arg("ground_truths"));

    m.def("huber", &huber, py::arg("e"), "0.5 e^2 for e <= 1, else e - 0.5");

    m.def(
        "greedy_rollout",
        [](const std::vector<double>& kappa, double zeta,
           const std::vector<std::vector<double>>& rho) {
            std::size_t n = kappa.size();
            Tensor k = Tensor::vector(std::vector<double>(kappa));
            Tensor r({n, n});
            detail::require(rho.size() == n, "rho must be N x N");
            for (std::size_t i = 0; i < n; ++i) {
                detail::require(rho[i].size() == n, "rho must be N x N");
                for (std::size_t j = 0; j < n; ++j) r.at(i, j) = rho[i][j];
            }
            Episode ep = greedy_rollout(k, zeta, r);
            py::dict out;
            out["count"] = ep.count;
            out["selected"] = ep.selected;
            out["actions"] = ep.actions;
            return out;
        },
        py::arg("kappa"), py::arg("zeta"), py::arg("rho"),
        "Deterministic counting rollout over static logits and interactions");

    m.def(
        "run_train",
        [](const std::string& config_json) {
            TrainOutcome out = cmd_train(config_from_json_text(config_json));
            py::dict d;
            d["checkpoint"] = out.checkpoint_path;
            d["config"] = out.config_path;
            d["log"] = out.log_path;
            d["best_epoch"] = out.best_epoch;
            d["best_dev_accuracy"] = out.best_dev_accuracy;
            d["best_dev_rmse"] = out.best_dev_rmse;
            return d;
        },
        py::arg("config_json"), "Full training run from a JSON config string");

    m.def(
        "run_eval",
        [](const std::string& config_json, const std::string& checkpoint,
           const std::string& split, const std::string& out_dir) {
            EvalOutcome out =
                cmd_eval(config_from_json_text(config_json), checkpoint, split, out_dir);
            py::dict d;
            d["accuracy"] = out.metrics.accuracy;
            d["rmse"] = out.metrics.rmse_value;
            d["n"] = out.metrics.n;
            d["metrics_csv"] = out.metrics_csv;
            d["dump_jsonl"] = out.dump_jsonl;
            return d;
        },
        py::arg("config_json"), py::arg("checkpoint"), py::arg("split"), py::arg("out_dir"));

    m.def(
        "run_synth",
        [](const std::string& config_json) {
            SynthOutcome out = cmd_synth(config_from_json_text(config_json));
            py::dict d;
            d["features"] = out.features_file;
            d["labels"] = out.labels_file;
            d["train_questions"] = out.train_questions;
            d["train_annotations"] = out.train_annotations;
            d["dev_questions"] = out.dev_questions;
            d["dev_annotations"] = out.dev_annotations;
            d["captions"] = out.captions_file;
            return d;
        },
        py::arg("config_json"), "Materialize a synthetic dataset to files");

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&, const std::string&>(), py::arg("config_path"),
             py::arg("checkpoint_path"))
        .def("count", &PyModel::count, py::arg("question"), py::arg("boxes"),
             py::arg("features"), py::arg("width") = 1.0, py::arg("height") = 1.0,
             "Grounded count for one scene: per-object weights plus the prediction")
        .def_property_readonly("kind", &PyModel::kind);
}
