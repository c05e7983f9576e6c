#pragma once

#include <string>
#include <vector>

#include "countvqa/records.hpp"
#include "countvqa/rng.hpp"

namespace cvqa {

/// Synthetic-scene knobs. Everything downstream is a pure function of this
/// struct plus the seed; per-image streams are derived from (seed, image
/// index).
struct SynthConfig {
    int categories = 3;
    // P(a category contributes 0, 1, 2, ... true objects to a scene)
    std::vector<double> count_weights = {0.3, 0.5, 0.15, 0.05};
    double duplicate_rate = 0.5;  // per true object
    double dup_iou_min = 0.6;
    double dup_iou_max = 0.9;
    double distractor_rate = 0.0;  // per category: chance of one false positive
    double feature_noise = 0.05;
    double zero_question_rate = 0.25;
    bool captions = true;  // attach one region caption per true object
    std::size_t d_v = 64;
    std::uint64_t seed = 1;
};

/// Category index -> question word ("square", "circle", ...).
std::vector<std::string> category_words(int n);
std::string pluralize(const std::string& word);

SceneRecord generate_synthetic_scene(const SynthConfig& cfg, std::uint64_t image_index);

/// Templated question about one category of the scene; the ground truth is
/// the number of true objects of that category, so duplicate proposals are
/// the suppression challenge. Zero-count questions target absent categories.
QARecord generate_synthetic_qa(const SynthConfig& cfg, const SceneRecord& scene,
                               std::uint64_t image_index);

struct SynthDataset {
    std::vector<SceneRecord> scenes;
    std::vector<QARecord> qa;  // one per scene
    std::vector<std::string> categories;
};

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg, std::size_t n_scenes,
                                        std::uint64_t first_image_index = 0);

}  // namespace cvqa
