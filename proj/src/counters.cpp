#include "countvqa/counters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "countvqa/grounding.hpp"

namespace cvqa {

namespace {

std::vector<int> available_objects(const std::vector<bool>& used) {
    std::vector<int> avail;
    for (std::size_t i = 0; i < used.size(); ++i)
        if (!used[i]) avail.push_back(static_cast<int>(i));
    return avail;
}

std::vector<double> full_distribution(int n, const std::vector<int>& avail,
                                      const Tensor& compact) {
    // compact covers [avail..., terminal]; expand to N+1 with masked zeros.
    std::vector<double> dist(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::size_t i = 0; i < avail.size(); ++i)
        dist[static_cast<std::size_t>(avail[i])] = compact[i];
    dist[static_cast<std::size_t>(n)] = compact[avail.size()];
    return dist;
}

std::vector<double> forced_terminal_distribution(int n) {
    std::vector<double> dist(static_cast<std::size_t>(n) + 1, 0.0);
    dist[static_cast<std::size_t>(n)] = 1.0;
    return dist;
}

}  // namespace

int clamp_count(double raw) {
    long long r = std::llround(raw);
    if (r < 0) r = 0;
    if (r > kMaxCount) r = kMaxCount;
    return static_cast<int>(r);
}

Episode greedy_rollout(const Tensor& kappa0, double zeta, const Tensor& rho, int cap) {
    int n = static_cast<int>(kappa0.size());
    detail::require(rho.size() == kappa0.size() * kappa0.size(),
                    "greedy_rollout: rho must be N x N");
    Episode ep;
    ep.zeta = zeta;
    int effcap = std::min(n, cap);
    Tensor kappa = kappa0;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (;;) {
        ep.kappa_trajectory.push_back(kappa);
        if (ep.count == effcap) {
            ep.step_distributions.push_back(forced_terminal_distribution(n));
            ep.actions.push_back(kTerminalAction);
            break;
        }
        std::vector<int> avail = available_objects(used);
        // softmax over [kappa(avail), zeta], recorded for inspection
        double mx = zeta;
        for (int a : avail) mx = std::max(mx, kappa[static_cast<std::size_t>(a)]);
        double z = std::exp(zeta - mx);
        for (int a : avail) z += std::exp(kappa[static_cast<std::size_t>(a)] - mx);
        std::vector<double> dist(static_cast<std::size_t>(n) + 1, 0.0);
        for (int a : avail)
            dist[static_cast<std::size_t>(a)] = std::exp(kappa[static_cast<std::size_t>(a)] - mx) / z;
        dist[static_cast<std::size_t>(n)] = std::exp(zeta - mx) / z;
        ep.step_distributions.push_back(dist);

        int best = -1;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int a : avail) {
            if (kappa[static_cast<std::size_t>(a)] > best_v) {
                best_v = kappa[static_cast<std::size_t>(a)];
                best = a;
            }
        }
        if (best < 0 || zeta > best_v) {
            ep.actions.push_back(kTerminalAction);
            break;
        }
        ep.actions.push_back(best);
        ep.selected.push_back(best);
        used[static_cast<std::size_t>(best)] = true;
        ++ep.count;
        for (int j = 0; j < n; ++j)
            kappa[static_cast<std::size_t>(j)] +=
                rho.at(static_cast<std::size_t>(best), static_cast<std::size_t>(j));
    }
    return ep;
}

namespace {

/// Shared body of sample_rollout and forced_rollout: `choose` maps the
/// compact distribution (objects in `avail` order, terminal last) to the
/// chosen compact index.
template <typename ChooseFn>
Episode rollout_on_tape(Graph& g, Var kappa0, Var zeta, Var rho, int cap, ChooseFn choose) {
    int n = static_cast<int>(g.value(kappa0).size());
    detail::require(g.value(rho).size() == g.value(kappa0).size() * g.value(kappa0).size(),
                    "rollout: rho must be N x N");
    Episode ep;
    ep.zeta = g.value(zeta).item();
    ep.recorded = g.recording();
    int effcap = std::min(n, cap);
    Var kappa = kappa0;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (;;) {
        ep.kappa_trajectory.push_back(g.value(kappa));
        if (ep.count == effcap) {
            ep.step_distributions.push_back(forced_terminal_distribution(n));
            ep.actions.push_back(kTerminalAction);
            break;
        }
        std::vector<int> avail = available_objects(used);
        std::vector<std::size_t> idx(avail.begin(), avail.end());
        Var p = g.softmax(g.concat(g.gather(kappa, idx), zeta));
        const Tensor& pv = g.value(p);
        std::size_t k = choose(ep.count, avail, pv);
        ep.step_distributions.push_back(full_distribution(n, avail, pv));
        if (g.recording()) {
            ep.step_logprobs.push_back(g.log_op(g.pick(p, k)));
            ep.step_dists.push_back(p);
        }
        if (k == avail.size()) {
            ep.actions.push_back(kTerminalAction);
            break;
        }
        int a = avail[k];
        ep.actions.push_back(a);
        ep.selected.push_back(a);
        used[static_cast<std::size_t>(a)] = true;
        ++ep.count;
        kappa = g.add(kappa, g.row(rho, static_cast<std::size_t>(a)));
    }
    return ep;
}

}  // namespace

Episode sample_rollout(Graph& g, Var kappa0, Var zeta, Var rho, Rng& rng, int cap) {
    return rollout_on_tape(g, kappa0, zeta, rho, cap,
                           [&rng](int, const std::vector<int>&, const Tensor& p) {
                               double u = rng.uniform01();
                               double cum = 0.0;
                               for (std::size_t i = 0; i + 1 < p.size(); ++i) {
                                   cum += p[i];
                                   if (u < cum) return i;
                               }
                               return p.size() - 1;
                           });
}

Episode forced_rollout(Graph& g, Var kappa0, Var zeta, Var rho,
                       const std::vector<int>& action_objects, int cap) {
    return rollout_on_tape(
        g, kappa0, zeta, rho, cap,
        [&action_objects](int step, const std::vector<int>& avail, const Tensor&) {
            if (step >= static_cast<int>(action_objects.size())) return avail.size();
            int want = action_objects[static_cast<std::size_t>(step)];
            for (std::size_t i = 0; i < avail.size(); ++i)
                if (avail[i] == want) return i;
            throw std::invalid_argument("forced_rollout: action not available");
        });
}

Var selfcritical_loss(Graph& g, const Episode& sampled, const Episode& greedy, int gt_count) {
    detail::require(sampled.recorded, "selfcritical_loss: sampled episode is not recorded");
    double err_sampled = std::abs(sampled.count - gt_count);
    double err_greedy = std::abs(greedy.count - gt_count);
    double reward = err_greedy - err_sampled;  // constant; no gradient through it
    Var sum;
    for (Var lp : sampled.step_logprobs) sum = sum.valid() ? g.add(sum, lp) : lp;
    if (!sum.valid()) return g.input(Tensor::scalar(0.0));
    return g.scale(sum, -reward);
}

Var entropy_penalty(Graph& g, const Episode& episode) {
    detail::require(episode.recorded, "entropy_penalty: episode is not recorded");
    Var total;
    for (Var p : episode.step_dists) {
        Var neg_h = g.sum(g.mul(p, g.log_op(p)));
        total = total.valid() ? g.add(total, neg_h) : neg_h;
    }
    if (!total.valid()) return g.input(Tensor::scalar(0.0));
    return total;
}

Var interaction_penalty(Graph& g, const Episode& episode, Var rho) {
    if (episode.selected.empty()) return g.input(Tensor::scalar(0.0));
    Var total;
    for (int a : episode.selected) {
        Var term = g.mean(g.huber_op(g.abs_op(g.row(rho, static_cast<std::size_t>(a)))));
        total = total.valid() ? g.add(total, term) : term;
    }
    return total;
}

// ---------------------------------------------------------------------------

namespace {

Var encode_question(Graph& g, const SequenceEncoder& enc, const Vocabulary& vocab,
                    const std::vector<std::string>& tokens, bool training, Rng* rng,
                    double dropout_rate) {
    Var q = enc.encode(g, vocab, tokens);
    if (training && dropout_rate > 0.0) q = g.dropout(q, dropout_rate, true, *rng);
    return q;
}

/// Backpropagates the 0.1-weighted caption-grounding term for one batch.
/// Returns its weighted loss value.
double apply_grounding_term(GroundingHead* head, const Vocabulary& vocab,
                            const std::vector<TrainItem>& batch, const TrainOptions& opt,
                            Rng& rng) {
    if (!opt.grounding || head == nullptr) return 0.0;
    Graph g(true);
    std::vector<const SceneRecord*> scenes;
    scenes.reserve(batch.size());
    for (const TrainItem& it : batch) scenes.push_back(it.scene);
    Var loss = grounding_batch_loss(g, *head, vocab, scenes, opt.grounding_images, rng);
    if (!loss.valid()) return 0.0;
    g.backward(g.scale(loss, opt.grounding_weight));
    return opt.grounding_weight * g.value(loss).item();
}

void init_encoder(SequenceEncoder& enc, ParameterStore& ps, const Vocabulary& vocab,
                  const ModelDims& d) {
    enc.embeddings = &ps.matrix("embed.table", vocab.size(), d.d_emb);
    enc.lstm = make_lstm(ps, "question_lstm", d.d_emb, d.d_hid);
    enc.d_emb = d.d_emb;
    enc.d_hid = d.d_hid;
}

void init_scorer(Scorer& s, ParameterStore& ps, const ModelDims& d) {
    s.fs = make_gtu(ps, "scorer.fs", d.d_hid + d.d_v, d.score_dim);
    s.score_dim = d.score_dim;
}

}  // namespace

// ---- SoftCount ----

SoftCountModel::SoftCountModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed,
                               bool with_grounding)
    : CountingModel("softcount", vocab, dims, seed) {
    init_encoder(encoder, store_, vocab, dims_);
    init_scorer(scorer, store_, dims_);
    count_proj = make_affine(store_, "softcount.proj", dims_.score_dim, 1);
    if (with_grounding)
        grounding_ = std::make_unique<GroundingHead>(make_grounding_head(
            store_, encoder.embeddings, &scorer, dims_.d_emb, dims_.d_hid, dims_.score_dim));
}

SoftCountModel::~SoftCountModel() = default;

SoftCountModel::Forward SoftCountModel::forward(Graph& g, const SceneRecord& scene,
                                                const std::vector<std::string>& tokens,
                                                bool training, Rng* rng, double dropout_rate) {
    Forward f;
    std::size_t n = scene.object_count();
    if (n == 0) {
        f.raw = g.input(Tensor::scalar(0.0));
        f.weights = g.input(Tensor({0}));
        return f;
    }
    Var q = encode_question(g, encoder, *vocab_, tokens, training, rng, dropout_rate);
    Var scores = scorer.score_objects(g, q, scene);
    if (training && dropout_rate > 0.0) scores = g.dropout(scores, dropout_rate, true, *rng);
    f.weights = g.sigmoid_op(g.reshape(linear_rows(g, scores, count_proj), {n}));
    f.raw = g.sum(f.weights);
    return f;
}

CountPrediction SoftCountModel::predict(const SceneRecord& scene,
                                        const std::vector<std::string>& tokens) {
    Graph g(false);
    Forward f = forward(g, scene, tokens, false, nullptr, 0.0);
    CountPrediction cp;
    cp.raw = g.value(f.raw).item();
    cp.count = clamp_count(cp.raw);
    cp.weights = g.value(f.weights).data();
    return cp;
}

BatchStats SoftCountModel::train_batch(const std::vector<TrainItem>& batch,
                                       const TrainOptions& opt, Rng& rng) {
    detail::require(!batch.empty(), "train_batch: empty batch");
    BatchStats st;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const TrainItem& it : batch) {
        Graph g(true);
        Forward f = forward(g, *it.scene, it.qa->tokens, true, &rng, opt.dropout);
        Var err = g.abs_op(g.sub(f.raw, g.input(Tensor::scalar(it.qa->gt_count))));
        Var loss = g.huber_op(err);
        st.loss += g.value(loss).item() * inv_b;
        st.correct += clamp_count(g.value(f.raw).item()) == it.qa->gt_count ? 1 : 0;
        ++st.total;
        g.backward(g.scale(loss, inv_b));
    }
    st.loss += apply_grounding_term(grounding_.get(), *vocab_, batch, opt, rng);
    return st;
}

// ---- UpDown ----

UpDownModel::UpDownModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed,
                         bool with_grounding)
    : CountingModel("updown", vocab, dims, seed) {
    init_encoder(encoder, store_, vocab, dims_);
    init_scorer(scorer, store_, dims_);
    att_proj = make_affine(store_, "updown.att", dims_.score_dim, 1);
    std::size_t joint = dims_.score_dim;
    f_visual = make_gtu(store_, "updown.fv", dims_.d_v, joint);
    f_question = make_gtu(store_, "updown.fq", dims_.d_hid, joint);
    f_joint = make_gtu(store_, "updown.fc", joint, joint);
    classifier = make_affine(store_, "updown.cls", joint, dims_.classes);
    if (with_grounding)
        grounding_ = std::make_unique<GroundingHead>(make_grounding_head(
            store_, encoder.embeddings, &scorer, dims_.d_emb, dims_.d_hid, dims_.score_dim));
}

UpDownModel::~UpDownModel() = default;

UpDownModel::Forward UpDownModel::forward(Graph& g, const SceneRecord& scene,
                                          const std::vector<std::string>& tokens, bool training,
                                          Rng* rng, double dropout_rate) {
    std::size_t n = scene.object_count();
    detail::require(n >= 1, "updown: at least one proposal required");
    Forward f;
    Var q = encode_question(g, encoder, *vocab_, tokens, training, rng, dropout_rate);
    Var scores = scorer.score_objects(g, q, scene);
    if (training && dropout_rate > 0.0) scores = g.dropout(scores, dropout_rate, true, *rng);
    f.alpha = g.softmax(g.reshape(linear_rows(g, scores, att_proj), {n}));
    Var vhat = g.vecmat(f.alpha, g.input(scene.features));
    Var joint = g.mul(gtu(g, vhat, f_visual), gtu(g, q, f_question));
    Var logits = affine(g, gtu(g, joint, f_joint), classifier);
    f.probs = g.softmax(logits);
    return f;
}

CountPrediction UpDownModel::predict(const SceneRecord& scene,
                                     const std::vector<std::string>& tokens) {
    CountPrediction cp;
    if (scene.object_count() == 0) {
        // empty-scene bypass: no proposals to attend over
        cp.count = 0;
        cp.probs.assign(dims_.classes, 0.0);
        cp.probs[0] = 1.0;
        return cp;
    }
    Graph g(false);
    Forward f = forward(g, scene, tokens, false, nullptr, 0.0);
    const Tensor& p = g.value(f.probs);
    int best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    cp.count = best;
    cp.probs = p.data();
    cp.weights = g.value(f.alpha).data();
    return cp;
}

BatchStats UpDownModel::train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                                    Rng& rng) {
    detail::require(!batch.empty(), "train_batch: empty batch");
    BatchStats st;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const TrainItem& it : batch) {
        ++st.total;
        if (it.scene->object_count() == 0) {
            st.correct += it.qa->gt_count == 0 ? 1 : 0;
            continue;
        }
        Graph g(true);
        Forward f = forward(g, *it.scene, it.qa->tokens, true, &rng, opt.dropout);
        Var loss = g.cross_entropy(f.probs, static_cast<std::size_t>(it.qa->gt_count));
        st.loss += g.value(loss).item() * inv_b;
        const Tensor& p = g.value(f.probs);
        int best = 0;
        for (std::size_t i = 1; i < p.size(); ++i)
            if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
        st.correct += best == it.qa->gt_count ? 1 : 0;
        g.backward(g.scale(loss, inv_b));
    }
    st.loss += apply_grounding_term(grounding_.get(), *vocab_, batch, opt, rng);
    return st;
}

// ---- IRLC ----

IrlcModel::IrlcModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed,
                     bool with_grounding)
    : CountingModel("irlc", vocab, dims, seed) {
    init_encoder(encoder, store_, vocab, dims_);
    init_scorer(scorer, store_, dims_);
    kappa_proj = make_affine(store_, "irlc.kappa", dims_.score_dim, 1);
    zeta = &store_.scalar("irlc.zeta", 0.0);
    q_compress = make_affine(store_, "irlc.qc", dims_.d_hid, dims_.q_compress);
    inter_hidden_layer = make_affine(store_, "irlc.inter1", dims_.q_compress + 12,
                                     dims_.inter_hidden);
    inter_out_layer = make_affine(store_, "irlc.inter2", dims_.inter_hidden, 1);
    if (with_grounding)
        grounding_ = std::make_unique<GroundingHead>(make_grounding_head(
            store_, encoder.embeddings, &scorer, dims_.d_emb, dims_.d_hid, dims_.score_dim));
}

IrlcModel::~IrlcModel() = default;

const Tensor& IrlcModel::pair_feature_rows(const SceneRecord& scene) {
    auto it = pair_cache_.find(scene.image_id);
    if (it != pair_cache_.end()) return it->second;

    std::size_t n = scene.object_count();
    std::size_t d = scene.feature_dim();
    // L2-normalized feature rows for the similarity term
    std::vector<double> norm(scene.features.data());
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += norm[i * d + j] * norm[i * d + j];
        s = std::sqrt(s);
        if (s > 0.0)
            for (std::size_t j = 0; j < d; ++j) norm[i * d + j] /= s;
    }
    Tensor rows({n * n, 12});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t r = i * n + j;
            double dp = 0.0;
            for (std::size_t k = 0; k < d; ++k) dp += norm[i * d + k] * norm[j * d + k];
            rows.at(r, 0) = dp;
            auto pf = pair_features(scene.boxes[i], scene.boxes[j], scene.width, scene.height);
            for (std::size_t k = 0; k < pf.size(); ++k) rows.at(r, 1 + k) = pf[k];
        }
    return pair_cache_.emplace(scene.image_id, std::move(rows)).first->second;
}

IrlcModel::Forward IrlcModel::forward(Graph& g, const SceneRecord& scene,
                                      const std::vector<std::string>& tokens, bool training,
                                      Rng* rng, double dropout_rate) {
    Forward f;
    std::size_t n = scene.object_count();
    f.q = encode_question(g, encoder, *vocab_, tokens, training, rng, dropout_rate);
    if (n == 0) {
        f.scores = g.input(Tensor({0, dims_.score_dim}));
        f.kappa0 = g.input(Tensor({0}));
        f.rho = g.input(Tensor({0, 0}));
        return f;
    }
    f.scores = scorer.score_objects(g, f.q, scene);
    if (training && dropout_rate > 0.0) f.scores = g.dropout(f.scores, dropout_rate, true, *rng);
    f.kappa0 = g.reshape(linear_rows(g, f.scores, kappa_proj), {n});

    Var wq = affine(g, f.q, q_compress);
    Var x = g.hconcat(g.tile_rows(wq, n * n), g.input(pair_feature_rows(scene)));
    Var hidden = g.relu_op(linear_rows(g, x, inter_hidden_layer));
    f.rho = g.reshape(linear_rows(g, hidden, inter_out_layer), {n, n});
    return f;
}

CountPrediction IrlcModel::predict(const SceneRecord& scene,
                                   const std::vector<std::string>& tokens) {
    Graph g(false);
    Forward f = forward(g, scene, tokens, false, nullptr, 0.0);
    Episode ep = greedy_rollout(g.value(f.kappa0), zeta->value.item(), g.value(f.rho));
    CountPrediction cp;
    cp.count = ep.count;
    cp.raw = ep.count;
    cp.selected = ep.selected;
    cp.weights.assign(scene.object_count(), 0.0);
    for (int a : ep.selected) cp.weights[static_cast<std::size_t>(a)] = 1.0;
    return cp;
}

Tensor IrlcModel::interaction_matrix(const SceneRecord& scene,
                                     const std::vector<std::string>& tokens) {
    Graph g(false);
    Forward f = forward(g, scene, tokens, false, nullptr, 0.0);
    return g.value(f.rho);
}

BatchStats IrlcModel::train_batch(const std::vector<TrainItem>& batch, const TrainOptions& opt,
                                  Rng& rng) {
    detail::require(!batch.empty(), "train_batch: empty batch");
    BatchStats st;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const TrainItem& it : batch) {
        Graph g(true);
        Forward f = forward(g, *it.scene, it.qa->tokens, true, &rng, opt.dropout);
        Var zeta_var = g.param(*zeta);
        Episode greedy = greedy_rollout(g.value(f.kappa0), zeta->value.item(), g.value(f.rho));
        int gt = it.qa->gt_count;

        Var question_loss;
        for (int s = 0; s < opt.irlc_samples; ++s) {
            Episode ep = sample_rollout(g, f.kappa0, zeta_var, f.rho, rng);
            Var term = selfcritical_loss(g, ep, greedy, gt);
            term = g.add(term, g.scale(entropy_penalty(g, ep), opt.entropy_weight));
            term = g.add(term, g.scale(interaction_penalty(g, ep, f.rho), opt.interaction_weight));
            term = g.scale(term, 1.0 / static_cast<double>(ep.decision_steps()));
            question_loss = question_loss.valid() ? g.add(question_loss, term) : term;
        }
        question_loss = g.scale(question_loss, 1.0 / static_cast<double>(opt.irlc_samples));
        st.loss += g.value(question_loss).item() * inv_b;
        st.correct += greedy.count == gt ? 1 : 0;
        ++st.total;
        g.backward(g.scale(question_loss, inv_b));
    }
    st.loss += apply_grounding_term(grounding_.get(), *vocab_, batch, opt, rng);
    return st;
}

// ---- non-visual baselines ----

Guess1Model::Guess1Model(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed)
    : CountingModel("guess1", vocab, dims, seed) {
    mode_ = &store_.scalar("guess1.mode", 1.0, /*trainable=*/false);
}

void Guess1Model::fit(const std::vector<TrainItem>& train) {
    detail::require(!train.empty(), "guess1: empty training split");
    std::vector<std::size_t> freq(kMaxCount + 1, 0);
    for (const TrainItem& it : train) ++freq[static_cast<std::size_t>(it.qa->gt_count)];
    std::size_t best = 0;
    for (std::size_t c = 1; c < freq.size(); ++c)
        if (freq[c] > freq[best]) best = c;
    mode_->value[0] = static_cast<double>(best);
}

int Guess1Model::mode() const { return static_cast<int>(mode_->value[0]); }

CountPrediction Guess1Model::predict(const SceneRecord&, const std::vector<std::string>&) {
    CountPrediction cp;
    cp.count = mode();
    cp.raw = mode();
    return cp;
}

BatchStats Guess1Model::train_batch(const std::vector<TrainItem>& batch, const TrainOptions&,
                                    Rng&) {
    BatchStats st;
    for (const TrainItem& it : batch) {
        st.correct += mode() == it.qa->gt_count ? 1 : 0;
        ++st.total;
    }
    return st;
}

LstmBaselineModel::LstmBaselineModel(const Vocabulary& vocab, ModelDims dims, std::uint64_t seed)
    : CountingModel("lstm", vocab, dims, seed) {
    init_encoder(encoder, store_, vocab, dims_);
    head = make_affine(store_, "lstm_baseline.head", dims_.d_hid, 1);
}

Var LstmBaselineModel::forward_raw(Graph& g, const std::vector<std::string>& tokens,
                                   bool training, Rng* rng, double dropout_rate) {
    Var q = encode_question(g, encoder, *vocab_, tokens, training, rng, dropout_rate);
    return g.pick(affine(g, q, head), 0);
}

CountPrediction LstmBaselineModel::predict(const SceneRecord&,
                                           const std::vector<std::string>& tokens) {
    Graph g(false);
    Var raw = forward_raw(g, tokens, false, nullptr, 0.0);
    CountPrediction cp;
    cp.raw = g.value(raw).item();
    cp.count = clamp_count(cp.raw);
    return cp;
}

BatchStats LstmBaselineModel::train_batch(const std::vector<TrainItem>& batch,
                                          const TrainOptions& opt, Rng& rng) {
    detail::require(!batch.empty(), "train_batch: empty batch");
    BatchStats st;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const TrainItem& it : batch) {
        Graph g(true);
        Var raw = forward_raw(g, it.qa->tokens, true, &rng, opt.dropout);
        Var loss = g.huber_op(g.abs_op(g.sub(raw, g.input(Tensor::scalar(it.qa->gt_count)))));
        st.loss += g.value(loss).item() * inv_b;
        st.correct += clamp_count(g.value(raw).item()) == it.qa->gt_count ? 1 : 0;
        ++st.total;
        g.backward(g.scale(loss, inv_b));
    }
    return st;
}

std::unique_ptr<CountingModel> make_model(const std::string& kind, const Vocabulary& vocab,
                                          ModelDims dims, std::uint64_t seed,
                                          bool with_grounding) {
    if (kind == "softcount")
        return std::make_unique<SoftCountModel>(vocab, dims, seed, with_grounding);
    if (kind == "updown") return std::make_unique<UpDownModel>(vocab, dims, seed, with_grounding);
    if (kind == "irlc") return std::make_unique<IrlcModel>(vocab, dims, seed, with_grounding);
    if (kind == "guess1") return std::make_unique<Guess1Model>(vocab, dims, seed);
    if (kind == "lstm") return std::make_unique<LstmBaselineModel>(vocab, dims, seed);
    throw std::invalid_argument("unknown model kind: " + kind);
}

}  // namespace cvqa
