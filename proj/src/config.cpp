#include "countvqa/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

namespace cvqa {

using nlohmann::json;

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

bool is_relative(const std::string& p) { return !p.empty() && p[0] != '/'; }

void root_path(std::string& p, const std::string& root) {
    if (!root.empty() && is_relative(p)) p = root + "/" + p;
}

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }
    RunConfig c;
    get_if(j, "model", c.model);
    get_if(j, "profile", c.profile);
    get_if(j, "d_emb", c.d_emb);
    get_if(j, "d_hid", c.d_hid);
    get_if(j, "score_dim", c.score_dim);
    get_if(j, "d_v", c.d_v);
    get_if(j, "q_compress", c.q_compress);
    get_if(j, "inter_hidden", c.inter_hidden);
    get_if(j, "lr", c.lr);
    get_if(j, "adam_beta1", c.adam_beta1);
    get_if(j, "adam_beta2", c.adam_beta2);
    get_if(j, "adam_eps", c.adam_eps);
    get_if(j, "plateau_decay", c.plateau_decay);
    get_if(j, "plateau_patience", c.plateau_patience);
    get_if(j, "iter_decay", c.iter_decay);
    get_if(j, "batch_size", c.batch_size);
    get_if(j, "max_epochs", c.max_epochs);
    get_if(j, "patience", c.patience);
    get_if(j, "dropout", c.dropout);
    get_if(j, "entropy_weight", c.entropy_weight);
    get_if(j, "interaction_weight", c.interaction_weight);
    get_if(j, "irlc_samples", c.irlc_samples);
    get_if(j, "grounding", c.grounding);
    get_if(j, "grounding_weight", c.grounding_weight);
    get_if(j, "grounding_images", c.grounding_images);
    get_if(j, "seed", c.seed);
    get_if(j, "out", c.out_dir);
    get_if(j, "data", c.data);
    get_if(j, "synth_categories", c.synth.categories);
    get_if(j, "synth_count_weights", c.synth.count_weights);
    get_if(j, "synth_duplicate_rate", c.synth.duplicate_rate);
    get_if(j, "synth_dup_iou_min", c.synth.dup_iou_min);
    get_if(j, "synth_dup_iou_max", c.synth.dup_iou_max);
    get_if(j, "synth_distractor_rate", c.synth.distractor_rate);
    get_if(j, "synth_feature_noise", c.synth.feature_noise);
    get_if(j, "synth_zero_question_rate", c.synth.zero_question_rate);
    get_if(j, "synth_captions", c.synth.captions);
    get_if(j, "synth_train_scenes", c.synth_train_scenes);
    get_if(j, "synth_dev_scenes", c.synth_dev_scenes);
    get_if(j, "data_root", c.data_root);
    get_if(j, "features_file", c.features_file);
    get_if(j, "labels_file", c.labels_file);
    get_if(j, "train_questions", c.train_questions);
    get_if(j, "train_annotations", c.train_annotations);
    get_if(j, "val_questions", c.val_questions);
    get_if(j, "val_annotations", c.val_annotations);
    get_if(j, "vg_questions", c.vg_questions);
    get_if(j, "vg_annotations", c.vg_annotations);
    get_if(j, "captions_file", c.captions_file);
    get_if(j, "dev_manifest", c.dev_manifest);
    get_if(j, "test_manifest", c.test_manifest);
    get_if(j, "glove_file", c.glove_file);
    get_if(j, "test_size", c.test_size);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

std::string config_to_json_text(const RunConfig& c) {
    json j;
    j["model"] = c.model;
    j["profile"] = c.profile;
    j["d_emb"] = c.d_emb;
    j["d_hid"] = c.d_hid;
    j["score_dim"] = c.score_dim;
    j["d_v"] = c.d_v;
    j["q_compress"] = c.q_compress;
    j["inter_hidden"] = c.inter_hidden;
    j["lr"] = c.lr;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_eps"] = c.adam_eps;
    j["plateau_decay"] = c.plateau_decay;
    j["plateau_patience"] = c.plateau_patience;
    j["iter_decay"] = c.iter_decay;
    j["batch_size"] = c.batch_size;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["dropout"] = c.dropout;
    j["entropy_weight"] = c.entropy_weight;
    j["interaction_weight"] = c.interaction_weight;
    j["irlc_samples"] = c.irlc_samples;
    j["grounding"] = c.grounding;
    j["grounding_weight"] = c.grounding_weight;
    j["grounding_images"] = c.grounding_images;
    j["seed"] = c.seed;
    j["out"] = c.out_dir;
    j["data"] = c.data;
    j["synth_categories"] = c.synth.categories;
    j["synth_count_weights"] = c.synth.count_weights;
    j["synth_duplicate_rate"] = c.synth.duplicate_rate;
    j["synth_dup_iou_min"] = c.synth.dup_iou_min;
    j["synth_dup_iou_max"] = c.synth.dup_iou_max;
    j["synth_distractor_rate"] = c.synth.distractor_rate;
    j["synth_feature_noise"] = c.synth.feature_noise;
    j["synth_zero_question_rate"] = c.synth.zero_question_rate;
    j["synth_captions"] = c.synth.captions;
    j["synth_train_scenes"] = c.synth_train_scenes;
    j["synth_dev_scenes"] = c.synth_dev_scenes;
    j["data_root"] = c.data_root;
    j["features_file"] = c.features_file;
    j["labels_file"] = c.labels_file;
    j["train_questions"] = c.train_questions;
    j["train_annotations"] = c.train_annotations;
    j["val_questions"] = c.val_questions;
    j["val_annotations"] = c.val_annotations;
    j["vg_questions"] = c.vg_questions;
    j["vg_annotations"] = c.vg_annotations;
    j["captions_file"] = c.captions_file;
    j["dev_manifest"] = c.dev_manifest;
    j["test_manifest"] = c.test_manifest;
    j["glove_file"] = c.glove_file;
    j["test_size"] = c.test_size;
    return j.dump(2) + "\n";
}

void write_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write config " + path);
    os << config_to_json_text(cfg);
}

void apply_profile(RunConfig& c) {
    bool paper = c.profile == "paper";
    if (c.d_emb == 0) c.d_emb = paper ? 300 : 32;
    if (c.d_hid == 0) c.d_hid = paper ? 1024 : 64;
    if (c.d_v == 0) c.d_v = paper ? 2048 : static_cast<std::size_t>(64);
    if (c.score_dim == 0) {
        if (c.model == "irlc")
            c.score_dim = paper ? 2048 : 128;
        else
            c.score_dim = paper ? 512 : 64;
    }
    if (c.q_compress == 0) c.q_compress = c.d_hid / 4;
    if (c.inter_hidden == 0) c.inter_hidden = paper ? 256 : 64;
    if (c.lr == 0.0) c.lr = c.model == "irlc" ? 5e-4 : 3e-4;
    if (c.data_root.empty()) {
        const char* env = std::getenv("COUNTVQA_DATA");
        if (env) c.data_root = env;
    }
    c.synth.d_v = c.d_v;
    c.synth.seed = c.seed;
    for (std::string* p :
         {&c.features_file, &c.labels_file, &c.train_questions, &c.train_annotations,
          &c.val_questions, &c.val_annotations, &c.vg_questions, &c.vg_annotations,
          &c.captions_file, &c.dev_manifest, &c.test_manifest, &c.glove_file})
        root_path(*p, c.data_root);
}

std::vector<std::string> validate_config(const RunConfig& c) {
    std::vector<std::string> errors;
    static const std::set<std::string> kinds = {"softcount", "updown", "irlc", "guess1", "lstm"};
    if (!kinds.count(c.model)) errors.push_back("model must be one of softcount|updown|irlc|guess1|lstm");
    if (c.profile != "desk" && c.profile != "paper") errors.push_back("profile must be desk or paper");
    if (c.batch_size < 1) errors.push_back("batch_size must be >= 1");
    if (c.max_epochs < 1) errors.push_back("max_epochs must be >= 1");
    if (c.patience < 1) errors.push_back("patience must be >= 1");
    if (c.dropout < 0.0 || c.dropout >= 1.0) errors.push_back("dropout must be in [0, 1)");
    if (c.lr < 0.0) errors.push_back("lr must be positive");
    if (c.irlc_samples < 1) errors.push_back("irlc_samples must be >= 1");
    if (c.entropy_weight < 0.0) errors.push_back("entropy_weight must be >= 0");
    if (c.interaction_weight < 0.0) errors.push_back("interaction_weight must be >= 0");
    if (c.grounding_images < 1) errors.push_back("grounding_images must be >= 1");
    if (c.data != "synth" && c.data != "files") errors.push_back("data must be synth or files");
    if (c.data == "synth") {
        if (c.synth.categories < 1) errors.push_back("synth_categories must be >= 1");
        if (c.synth.count_weights.empty()) errors.push_back("synth_count_weights must be nonempty");
        for (double w : c.synth.count_weights)
            if (w < 0.0) {
                errors.push_back("synth_count_weights must be nonnegative");
                break;
            }
        if (c.synth.duplicate_rate < 0.0 || c.synth.duplicate_rate > 1.0)
            errors.push_back("synth_duplicate_rate must be in [0, 1]");
        if (c.synth.distractor_rate < 0.0 || c.synth.distractor_rate > 1.0)
            errors.push_back("synth_distractor_rate must be in [0, 1]");
        if (c.synth.dup_iou_min > c.synth.dup_iou_max || c.synth.dup_iou_min <= 0.0 ||
            c.synth.dup_iou_max >= 1.0)
            errors.push_back("synth duplicate IoU range must satisfy 0 < min <= max < 1");
        if (c.synth.zero_question_rate < 0.0 || c.synth.zero_question_rate > 1.0)
            errors.push_back("synth_zero_question_rate must be in [0, 1]");
        if (c.synth_train_scenes < 1) errors.push_back("synth_train_scenes must be >= 1");
        if (c.synth_dev_scenes < 1) errors.push_back("synth_dev_scenes must be >= 1");
        if (c.synth.categories > static_cast<int>(c.d_v))
            errors.push_back("synth_categories must be <= d_v for separable features");
    } else {
        if (c.features_file.empty()) errors.push_back("files data needs features_file");
        if (c.train_questions.empty() || c.train_annotations.empty())
            errors.push_back("files data needs train_questions and train_annotations");
        if (c.val_questions.empty() || c.val_annotations.empty())
            errors.push_back("files data needs val_questions and val_annotations");
    }
    return errors;
}

}  // namespace cvqa
