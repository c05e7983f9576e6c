#pragma once

#include <string>
#include <vector>

#include "countvqa/synth.hpp"

namespace cvqa {

/// One flat, documented key set; file values < CLI flag overrides. A zero
/// dimension or learning rate means "profile / model default", resolved by
/// apply_profile(). The fully resolved config is written next to every
/// run's outputs and suffices to reproduce it.
struct RunConfig {
    std::string model = "irlc";   // softcount | updown | irlc | guess1 | lstm
    std::string profile = "desk";  // desk | paper

    std::size_t d_emb = 0, d_hid = 0, score_dim = 0, d_v = 0;
    std::size_t q_compress = 0, inter_hidden = 0;

    double lr = 0.0;  // 0 = model default (3e-4; 5e-4 for irlc)
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    double plateau_decay = 0.8;
    int plateau_patience = 1;
    double iter_decay = 0.99999;  // irlc, per iteration

    int batch_size = 32;
    int max_epochs = 30;
    int patience = 5;  // early-stopping windows on dev accuracy
    double dropout = 0.3;

    double entropy_weight = 0.005;
    double interaction_weight = 0.005;
    int irlc_samples = 5;

    bool grounding = false;
    double grounding_weight = 0.1;
    int grounding_images = 4;

    std::uint64_t seed = 1;
    std::string out_dir = "out";

    // data source
    std::string data = "synth";  // synth | files
    SynthConfig synth;
    int synth_train_scenes = 2000;
    int synth_dev_scenes = 500;

    std::string data_root;  // env COUNTVQA_DATA by default
    std::string features_file, labels_file;
    std::string train_questions, train_annotations;
    std::string val_questions, val_annotations;
    std::string vg_questions, vg_annotations;
    std::string captions_file;
    std::string dev_manifest, test_manifest;
    std::string glove_file;
    int test_size = 5000;
};

RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json_text(const RunConfig& cfg);
void write_config(const RunConfig& cfg, const std::string& path);

/// Fills zero dims/lr from the profile ("desk" or "paper") and the model
/// kind, and roots relative data paths at data_root.
void apply_profile(RunConfig& cfg);

/// All validation failures at once; empty means valid.
std::vector<std::string> validate_config(const RunConfig& cfg);

}  // namespace cvqa
