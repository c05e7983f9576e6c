#include "countvqa/grounding.hpp"

#include <algorithm>

namespace cvqa {

int assign_caption(const Box& caption_box, const SceneRecord& scene) {
    int best = kUnassigned;
    double best_iou = 0.0;
    for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
        double v = iou(caption_box, scene.boxes[i]);
        if (v > best_iou) {
            best_iou = v;
            best = static_cast<int>(i);
        }
    }
    if (best_iou < 0.5) return kUnassigned;
    return best;
}

Var GroundingHead::forward(Graph& g, const Vocabulary& vocab,
                           const std::vector<std::string>& caption_tokens,
                           const SceneRecord& scene) const {
    detail::require(scene.object_count() >= 1, "grounding_forward: scene has no proposals");
    Var enc = caption_encoder.encode(g, vocab, caption_tokens);
    Var scores = scorer->score_objects(g, enc, scene);
    Var logits = g.reshape(linear_rows(g, scores, logit), {scene.object_count()});
    return g.softmax(logits);
}

GroundingHead make_grounding_head(ParameterStore& ps, Parameter* embeddings,
                                  const Scorer* scorer, std::size_t d_emb, std::size_t d_hid,
                                  std::size_t score_dim) {
    GroundingHead head;
    head.caption_encoder.embeddings = embeddings;
    head.caption_encoder.lstm = make_lstm(ps, "caption_lstm", d_emb, d_hid);
    head.caption_encoder.d_emb = d_emb;
    head.caption_encoder.d_hid = d_hid;
    head.scorer = scorer;
    head.logit = make_affine(ps, "grounding.logit", score_dim, 1);
    return head;
}

Var grounding_batch_loss(Graph& g, const GroundingHead& head, const Vocabulary& vocab,
                         const std::vector<const SceneRecord*>& batch_scenes, int image_budget,
                         Rng& rng) {
    std::vector<const SceneRecord*> unique;
    for (const SceneRecord* s : batch_scenes) {
        if (std::find(unique.begin(), unique.end(), s) == unique.end()) unique.push_back(s);
    }
    rng.shuffle(unique);
    if (static_cast<int>(unique.size()) > image_budget)
        unique.resize(static_cast<std::size_t>(image_budget));

    Var total;
    std::size_t n_captions = 0;
    for (const SceneRecord* scene : unique) {
        if (scene->object_count() == 0) continue;
        for (const CaptionRecord& cap : scene->captions) {
            if (cap.assigned == kUnassigned) continue;
            Var p = head.forward(g, vocab, cap.tokens, *scene);
            Var ce = g.cross_entropy(p, static_cast<std::size_t>(cap.assigned));
            total = total.valid() ? g.add(total, ce) : ce;
            ++n_captions;
        }
    }
    if (!total.valid()) return Var{};
    return g.scale(total, 1.0 / static_cast<double>(n_captions));
}

}  // namespace cvqa
