#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "countvqa/language.hpp"
#include "countvqa/nn.hpp"
#include "countvqa/records.hpp"

namespace cvqa {

constexpr int kMaxCount = 20;
constexpr int kTerminalAction = -1;

/// One counting rollout. Actions are distinct object indices followed by
/// exactly one terminal; the count is the step at which the terminal action
/// was selected. Sampled rollouts on a recording graph also carry the tape
/// handles the training losses need.
struct Episode {
    std::vector<Tensor> kappa_trajectory;                 // logits before each step
    std::vector<std::vector<double>> step_distributions;  // over N+1 actions, masked -> 0
    std::vector<int> actions;                             // last entry kTerminalAction
    std::vector<int> selected;
    int count = 0;
    double zeta = 0.0;

    bool recorded = false;
    std::vector<Var> step_logprobs;  // log p^t(a^t)
    std::vector<Var> step_dists;     // compact distribution over available actions + terminal

    int decision_steps() const { return count + 1; }
};

/// Deterministic rollout: argmax over the unselected logits and the terminal
/// logit, ties to the smaller index (objects before terminal).
Episode greedy_rollout(const Tensor& kappa0, double zeta, const Tensor& rho,
                       int cap = kMaxCount);

/// Stochastic rollout on the tape; records per-step distributions and log
/// probabilities. Already-selected objects are excluded from the softmax.
Episode sample_rollout(Graph& g, Var kappa0, Var zeta, Var rho, Rng& rng, int cap = kMaxCount);

/// Rollout that follows a prescribed action sequence (terminal excluded);
/// used by enumeration oracles.
Episode forced_rollout(Graph& g, Var kappa0, Var zeta, Var rho,
                       const std::vector<int>& action_objects, int cap = kMaxCount);

/// Self-critical REINFORCE loss: -R * sum_t log p^t(a^t) with
/// R = |C_greedy - gt| - |C_sampled - gt| treated as a constant.
Var selfcritical_loss(Graph& g, const Episode& sampled, const Episode& greedy, int gt_count);

/// Total negative policy entropy over the episode's recorded steps.
Var entropy_penalty(Graph& g, const Episode& episode);

/// For each selected action, the mean elementwise Huber magnitude of its
/// interaction row; summed over the episode's selections.
Var interaction_penalty(Graph& g, const Episode& episode, Var rho);

/// Round half away from zero, then clamp to [0, kMaxCount].
int clamp_count(double raw);

struct CountPrediction {
    int count = 0;
    double raw = 0.0;             // pre-rounding value where the head has one
    std::vector<double> weights;  // per-object count values
    std::vector<double> probs;    // UpDown: 21-way distribution
    std::vector<int> selected;    // IRLC: counted objects in selection order
};

struct ModelDims {
    std::size_t d_emb = 32;
    std::size_t d_hid = 64;
    std::size_t score_dim = 64;
    std::size_t d_v = 64;
    std::size_t classes = 21;
    std::size_t q_compress = 16;
    std::size_t inter_hidden = 64;
};

struct TrainItem {
    const SceneRecord* scene = nullptr;
    const QARecord* qa = nullptr;
};

struct TrainOptions {
    double dropout = 0.3;
    int irlc_samples = 5;
    double entropy_weight = 0.005;
    double interaction_weight = 0.005;
    bool grounding = false;
    double grounding_weight = 0.1;
    int grounding_images = 4;
};

struct BatchStats {
    double loss = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
};

struct GroundingHead;

/// Common surface of the five heads. train_batch accumulates gradients for
/// the whole batch (mean-reduced); the optimizer step belongs to the caller.
class CountingModel {
public:
    CountingModel(std::string kind, const Vocabulary& vocab, ModelDims dims, std::uint64_t seed)
        : kind_(std::move(kind)), vocab_(&vocab), dims_(dims), store_(seed) {}
    virtual ~CountingModel() = default;

    const std::string& kind() const { return kind_; }
    const ModelDims& dims() const { return dims_; }
    ParameterStore& params() { return store_; }

    virtual CountPrediction predict(const SceneRecord& scene,
                                    const std::vector<std::string>& tokens) = 0;

    virtual BatchStats train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                                   Rng& rng) = 0;

    virtual GroundingHead* grounding_head() { return nullptr; }

protected:
    std::string kind_;
    const Vocabulary* vocab_;
    ModelDims dims_;
    ParameterStore store_;
};

class SoftCountModel : public CountingModel {
public:
    SoftCountModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed,
                   bool with_grounding = false);
    ~SoftCountModel() override;

    CountPrediction predict(const SceneRecord& scene,
                            const std::vector<std::string>& tokens) override;
    BatchStats train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                           Rng& rng) override;
    GroundingHead* grounding_head() override { return grounding_.get(); }

    struct Forward {
        Var raw;      // scalar sum of per-object values
        Var weights;  // [N]
    };
    Forward forward(Graph& g, const SceneRecord& scene, const std::vector<std::string>& tokens,
                    bool training, Rng* rng, double dropout_rate);

    SequenceEncoder encoder;
    Scorer scorer;
    AffineParams count_proj;

private:
    std::unique_ptr<GroundingHead> grounding_;
};

class UpDownModel : public CountingModel {
public:
    UpDownModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed,
                bool with_grounding = false);
    ~UpDownModel() override;

    CountPrediction predict(const SceneRecord& scene,
                            const std::vector<std::string>& tokens) override;
    BatchStats train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                           Rng& rng) override;
    GroundingHead* grounding_head() override { return grounding_.get(); }

    struct Forward {
        Var alpha;  // [N] attention weights
        Var probs;  // [classes]
    };
    /// N >= 1 required; empty scenes take the count-0 bypass in predict().
    Forward forward(Graph& g, const SceneRecord& scene, const std::vector<std::string>& tokens,
                    bool training, Rng* rng, double dropout_rate);

    SequenceEncoder encoder;
    Scorer scorer;
    AffineParams att_proj;
    GtuParams f_visual, f_question, f_joint;
    AffineParams classifier;

private:
    std::unique_ptr<GroundingHead> grounding_;
};

class IrlcModel : public CountingModel {
public:
    IrlcModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed,
              bool with_grounding = false);
    ~IrlcModel() override;

    CountPrediction predict(const SceneRecord& scene,
                            const std::vector<std::string>& tokens) override;
    BatchStats train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                           Rng& rng) override;
    GroundingHead* grounding_head() override { return grounding_.get(); }

    struct Forward {
        Var q;
        Var scores;  // [N x n]
        Var kappa0;  // [N]
        Var rho;     // [N x N]
    };
    Forward forward(Graph& g, const SceneRecord& scene, const std::vector<std::string>& tokens,
                    bool training, Rng* rng, double dropout_rate);

    /// Evaluation-mode interaction matrix for a (scene, question) pair.
    Tensor interaction_matrix(const SceneRecord& scene, const std::vector<std::string>& tokens);

    SequenceEncoder encoder;
    Scorer scorer;
    AffineParams kappa_proj;
    Parameter* zeta = nullptr;
    AffineParams q_compress;
    AffineParams inter_hidden_layer, inter_out_layer;

private:
    const Tensor& pair_feature_rows(const SceneRecord& scene);

    std::unordered_map<std::string, Tensor> pair_cache_;
    std::unique_ptr<GroundingHead> grounding_;
};

/// Constant predictor: the modal ground-truth count of the training split.
class Guess1Model : public CountingModel {
public:
    Guess1Model(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed);

    /// Modal count; ties break to the smaller count. Empty split is an error.
    void fit(const std::vector<TrainItem>& train);
    int mode() const;

    CountPrediction predict(const SceneRecord& scene,
                            const std::vector<std::string>& tokens) override;
    BatchStats train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                           Rng& rng) override;

private:
    Parameter* mode_ = nullptr;
};

/// Question-only regressor: a linear projection of the question encoding,
/// trained with the same Huber loss as SoftCount.
class LstmBaselineModel : public CountingModel {
public:
    LstmBaselineModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed);

    CountPrediction predict(const SceneRecord& scene,
                            const std::vector<std::string>& tokens) override;
    BatchStats train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                           Rng& rng) override;

    Var forward_raw(Graph& g, const std::vector<std::string>& tokens, bool training, Rng* rng,
                    double dropout_rate);

    SequenceEncoder encoder;
    AffineParams head;
};

std::unique_ptr<CountingModel> make_model(const std::string& kind, const Vocabulary& vocab,
                                          ModelDims dims, std::uint64_t seed,
                                          bool with_grounding);

}  // namespace cvqa
