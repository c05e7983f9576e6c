#pragma once

#include <vector>

#include "countvqa/language.hpp"
#include "countvqa/records.hpp"

namespace cvqa {

/// Assigns a caption box to the proposal with the largest IoU, or
/// kUnassigned when the best IoU is below 0.5. Ties go to the smaller index.
int assign_caption(const Box& caption_box, const SceneRecord& scene);

/// Caption-grounding pathway: a caption-specific LSTM over the shared
/// embedding table, scored against proposals through the shared scoring
/// function, projected to scalar logits.
struct GroundingHead {
    SequenceEncoder caption_encoder;  // own LSTM weights, shared embeddings
    const Scorer* scorer = nullptr;   // shared counting scorer
    AffineParams logit;

    /// Probability over the scene's N proposals (N >= 1).
    Var forward(Graph& g, const Vocabulary& vocab, const std::vector<std::string>& caption_tokens,
                const SceneRecord& scene) const;
};

GroundingHead make_grounding_head(ParameterStore& ps, Parameter* embeddings,
                                  const Scorer* scorer, std::size_t d_emb, std::size_t d_hid,
                                  std::size_t score_dim);

/// Mean cross-entropy over the assigned captions of up to `image_budget`
/// batch images (sampled without replacement). Returns an invalid Var when
/// nothing is assigned; the term then contributes 0.
Var grounding_batch_loss(Graph& g, const GroundingHead& head, const Vocabulary& vocab,
                         const std::vector<const SceneRecord*>& batch_scenes, int image_budget,
                         Rng& rng);

}  // namespace cvqa
