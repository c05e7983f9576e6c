#include "countvqa/synth.hpp"

#include <algorithm>
#include <cmath>

#include "countvqa/data.hpp"
#include "countvqa/grounding.hpp"
#include "countvqa/language.hpp"

namespace cvqa {

namespace {

const std::vector<std::string> kWords = {
    "square", "circle",  "triangle", "star",  "diamond", "hexagon", "cross",
    "arrow",  "heart",   "ring",     "spiral", "cube",   "cone",    "prism",
    "wedge",  "disc",    "knot",     "loop",  "crescent", "spike"};

const std::vector<std::string> kAdjectives = {"red", "blue", "green", "small", "large"};

int sample_weighted(const std::vector<double>& weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.uniform01() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

Box random_box(Rng& rng) {
    double w = rng.uniform(0.1, 0.3);
    double h = rng.uniform(0.1, 0.3);
    double x = rng.uniform(0.0, 1.0 - w);
    double y = rng.uniform(0.0, 1.0 - h);
    return Box{x, y, x + w, y + h};
}

/// A box with IoU exactly `target` against `src`: a same-size box shifted
/// along one axis when it fits in the unit square, otherwise a contained
/// shrink (area fraction == IoU for contained boxes).
Box jittered_box(const Box& src, double target, Rng& rng) {
    double w = src.width(), h = src.height();
    double dx = w * (1.0 - target) / (1.0 + target);
    double dy = h * (1.0 - target) / (1.0 + target);
    int first = static_cast<int>(rng.uniform_index(4));
    for (int k = 0; k < 4; ++k) {
        switch ((first + k) % 4) {
            case 0:
                if (src.x2 + dx <= 1.0) return Box{src.x1 + dx, src.y1, src.x2 + dx, src.y2};
                break;
            case 1:
                if (src.x1 - dx >= 0.0) return Box{src.x1 - dx, src.y1, src.x2 - dx, src.y2};
                break;
            case 2:
                if (src.y2 + dy <= 1.0) return Box{src.x1, src.y1 + dy, src.x2, src.y2 + dy};
                break;
            case 3:
                if (src.y1 - dy >= 0.0) return Box{src.x1, src.y1 - dy, src.x2, src.y2 - dy};
                break;
        }
    }
    return Box{src.x1, src.y1, src.x1 + w * target, src.y2};
}

std::vector<double> category_feature(int category, std::size_t d_v, double noise, Rng& rng) {
    std::vector<double> f(d_v);
    for (std::size_t j = 0; j < d_v; ++j) f[j] = rng.gaussian(0.0, noise);
    f[static_cast<std::size_t>(category) % d_v] += 1.0;
    return f;
}

}  // namespace

std::vector<std::string> category_words(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        if (i < static_cast<int>(kWords.size()))
            out.push_back(kWords[static_cast<std::size_t>(i)]);
        else
            out.push_back("shape" + std::to_string(i));
    }
    return out;
}

std::string pluralize(const std::string& word) {
    auto ends_with = [&word](const char* suf) {
        std::string s(suf);
        return word.size() >= s.size() && word.compare(word.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with("s") || ends_with("x") || ends_with("z") || ends_with("ch") || ends_with("sh"))
        return word + "es";
    return word + "s";
}

SceneRecord generate_synthetic_scene(const SynthConfig& cfg, std::uint64_t image_index) {
    detail::require(cfg.categories >= 1, "synth: categories must be >= 1");
    detail::require(cfg.duplicate_rate >= 0.0 && cfg.duplicate_rate <= 1.0 &&
                        cfg.distractor_rate >= 0.0 && cfg.distractor_rate <= 1.0,
                    "synth: rates must be in [0, 1]");
    Rng rng = Rng::derive(cfg.seed, {0x5ce11e, image_index});

    SceneRecord scene;
    scene.image_id = std::to_string(image_index);  // VQA files carry integer image ids
    scene.width = 1.0;
    scene.height = 1.0;

    struct Proposal {
        Box box;
        int label;
        std::vector<double> feature;
    };
    std::vector<Proposal> proposals;

    for (int c = 0; c < cfg.categories; ++c) {
        int k = sample_weighted(cfg.count_weights, rng);
        for (int i = 0; i < k; ++i) {
            Box b = random_box(rng);
            scene.gt_objects.push_back({c, b});
            proposals.push_back({b, c, category_feature(c, cfg.d_v, cfg.feature_noise, rng)});
            if (rng.uniform01() < cfg.duplicate_rate) {
                double target = rng.uniform(cfg.dup_iou_min, cfg.dup_iou_max);
                Box dup = jittered_box(b, target, rng);
                proposals.push_back(
                    {dup, c, category_feature(c, cfg.d_v, cfg.feature_noise, rng)});
            }
        }
    }
    for (int c = 0; c < cfg.categories; ++c) {
        if (rng.uniform01() < cfg.distractor_rate) {
            proposals.push_back(
                {random_box(rng), kNoLabel, category_feature(c, cfg.d_v, cfg.feature_noise, rng)});
        }
    }
    rng.shuffle(proposals);

    std::size_t n = proposals.size();
    scene.features = Tensor({n, cfg.d_v});
    for (std::size_t i = 0; i < n; ++i) {
        scene.boxes.push_back(proposals[i].box);
        scene.proposal_labels.push_back(proposals[i].label);
        for (std::size_t j = 0; j < cfg.d_v; ++j) scene.features.at(i, j) = proposals[i].feature[j];
    }

    if (cfg.captions) {
        auto words = category_words(cfg.categories);
        for (const auto& obj : scene.gt_objects) {
            CaptionRecord cap;
            cap.tokens = {"a", kAdjectives[rng.uniform_index(kAdjectives.size())],
                          words[static_cast<std::size_t>(obj.category)]};
            cap.region = obj.box;
            cap.assigned = assign_caption(cap.region, scene);
            scene.captions.push_back(std::move(cap));
        }
    }
    return scene;
}

QARecord generate_synthetic_qa(const SynthConfig& cfg, const SceneRecord& scene,
                               std::uint64_t image_index) {
    Rng rng = Rng::derive(cfg.seed, {0x9a, image_index});
    auto words = category_words(cfg.categories);

    std::vector<int> counts(static_cast<std::size_t>(cfg.categories), 0);
    for (const auto& obj : scene.gt_objects) ++counts[static_cast<std::size_t>(obj.category)];
    std::vector<int> present, absent;
    for (int c = 0; c < cfg.categories; ++c)
        (counts[static_cast<std::size_t>(c)] > 0 ? present : absent).push_back(c);

    int category;
    bool ask_zero = present.empty() || (!absent.empty() && rng.uniform01() < cfg.zero_question_rate);
    if (ask_zero && !absent.empty())
        category = absent[rng.uniform_index(absent.size())];
    else
        category = present[rng.uniform_index(present.size())];

    QARecord qa;
    qa.question_id = static_cast<long long>(image_index);
    qa.image_id = scene.image_id;
    qa.question = "how many " + pluralize(words[static_cast<std::size_t>(category)]) +
                  " are there";
    qa.tokens = tokenize(qa.question);
    qa.gt_count = counts[static_cast<std::size_t>(category)];
    qa.human_answers.assign(10, std::to_string(qa.gt_count));
    qa.subject = extract_subject(qa.tokens);
    return qa;
}

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg, std::size_t n_scenes,
                                        std::uint64_t first_image_index) {
    SynthDataset ds;
    ds.categories = category_words(cfg.categories);
    for (std::size_t i = 0; i < n_scenes; ++i) {
        std::uint64_t idx = first_image_index + i;
        ds.scenes.push_back(generate_synthetic_scene(cfg, idx));
        ds.qa.push_back(generate_synthetic_qa(cfg, ds.scenes.back(), idx));
    }
    return ds;
}

}  // namespace cvqa
