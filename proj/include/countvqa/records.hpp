#pragma once

#include <string>
#include <vector>

#include "countvqa/geometry.hpp"
#include "countvqa/tensor.hpp"

namespace cvqa {

/// A ground-truth object instance (category + box), as carried by labeled
/// scenes. Real data takes these from detection-style annotations; the
/// synthetic generator knows them exactly.
struct GtObject {
    int category = -1;
    Box box;
};

constexpr int kNoLabel = -1;
constexpr int kUnassigned = -1;

/// A region caption attached to a scene, plus its proposal assignment.
struct CaptionRecord {
    std::vector<std::string> tokens;
    Box region;
    int assigned = kUnassigned;
};

/// Detected objects of one image: boxes b_i and feature vectors v_i, plus
/// optional ground truth for metrics and caption data for grounding.
struct SceneRecord {
    std::string image_id;
    double width = 1.0, height = 1.0;
    std::vector<Box> boxes;
    Tensor features;  // [N x d_v]

    // Optional ground truth. proposal_labels[i] is the category of the
    // object a proposal arose from (kNoLabel for false positives);
    // gt_objects lists the true countable instances.
    std::vector<int> proposal_labels;
    std::vector<GtObject> gt_objects;

    std::vector<CaptionRecord> captions;

    std::size_t object_count() const { return boxes.size(); }
    std::size_t feature_dim() const { return features.is_matrix() ? features.cols() : 0; }
};

/// One counting question with its consensus count and the ten human answer
/// strings the accuracy metric needs.
struct QARecord {
    long long question_id = 0;
    std::string image_id;
    std::string question;
    std::vector<std::string> tokens;
    int gt_count = 0;
    std::vector<std::string> human_answers;  // exactly 10 when VQA-sourced
    std::string subject;
    int bin = 0;  // 1..6 once assigned
};

}  // namespace cvqa
