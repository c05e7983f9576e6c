#include <doctest.h>

#include <cmath>
#include <map>

#include "countvqa/counters.hpp"
#include "test_util.hpp"

using namespace cvqa;

TEST_SUITE_BEGIN("counters");

namespace {

struct ModelFixture {
    Vocabulary vocab;
    ModelDims dims;

    ModelFixture() {
        for (auto w : {"how", "many", "squares", "circles", "are", "there"}) vocab.add(w);
        dims.d_emb = 4;
        dims.d_hid = 6;
        dims.score_dim = 8;
        dims.d_v = 5;
        dims.q_compress = 3;
        dims.inter_hidden = 7;
    }

    SceneRecord scene(std::size_t n) const {
        SceneRecord s;
        s.image_id = "img" + std::to_string(n);
        Rng rng(100 + n);
        s.features = Tensor({n, dims.d_v});
        for (std::size_t i = 0; i < n; ++i) {
            double x = rng.uniform(0.0, 0.6), y = rng.uniform(0.0, 0.6);
            s.boxes.push_back({x, y, x + 0.3, y + 0.3});
            for (std::size_t j = 0; j < dims.d_v; ++j)
                s.features.at(i, j) = rng.uniform(-1, 1);
        }
        return s;
    }

    std::vector<std::string> question() const {
        return {"how", "many", "squares", "are", "there"};
    }
};

Tensor zeros_rho(std::size_t n) { return Tensor({n, n}); }

}  // namespace

// ---- SoftCount ----

TEST_CASE("softcount prediction") {
    ModelFixture f;
    SoftCountModel model(f.vocab, f.dims, 3);

    SUBCASE("empty scene counts zero") {
        CountPrediction cp = model.predict(f.scene(0), f.question());
        CHECK(cp.count == 0);
        CHECK(cp.raw == doctest::Approx(0.0));
        CHECK(cp.weights.empty());
    }
    SUBCASE("per-object values sum and round") {
        // force every per-object value to sigmoid(b); solve for 0.9
        model.count_proj.w->value.fill(0);
        double b = std::log(0.9 / 0.1);
        model.count_proj.b->value[0] = b;
        CountPrediction cp = model.predict(f.scene(3), f.question());
        CHECK(cp.raw == doctest::Approx(2.7).epsilon(1e-9));
        CHECK(cp.count == 3);
        CHECK(cp.weights.size() == 3);
        for (double w : cp.weights) CHECK(w == doctest::Approx(0.9));
    }
    SUBCASE("counts clamp at the answer-range maximum") {
        model.count_proj.w->value.fill(0);
        model.count_proj.b->value[0] = 30.0;  // values ~1.0 each
        CountPrediction cp = model.predict(f.scene(30), f.question());
        CHECK(cp.raw == doctest::Approx(30.0).epsilon(1e-6));
        CHECK(cp.count == 20);
    }
}

TEST_CASE("softcount loss values") {
    auto loss_for = [](double raw, int gt) {
        Graph g;
        Var diff = g.abs_op(g.sub(g.input(Tensor::scalar(raw)), g.input(Tensor::scalar(gt))));
        return g.value(g.huber_op(diff)).item();
    };
    CHECK(loss_for(2.0, 2) == doctest::Approx(0.0));
    CHECK(loss_for(2.5, 2) == doctest::Approx(0.125));
    CHECK(loss_for(5.0, 2) == doctest::Approx(2.5));
}

TEST_CASE("softcount raw count is monotone in each per-object logit") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng.uniform_index(6);
        Tensor logits = test::random_tensor({n}, rng, 3.0);
        Graph g;
        double base = g.value(g.sum(g.sigmoid_op(g.input(logits)))).item();
        std::size_t i = rng.uniform_index(n);
        logits[i] += rng.uniform(0.0, 2.0);
        double bumped = g.value(g.sum(g.sigmoid_op(g.input(logits)))).item();
        CHECK(bumped >= base - 1e-12);
    }
}

TEST_CASE("softcount training reduces loss on a fixed batch") {
    ModelFixture f;
    SoftCountModel model(f.vocab, f.dims, 3);
    SceneRecord scene = f.scene(4);
    QARecord qa;
    qa.tokens = f.question();
    qa.gt_count = 2;
    std::vector<TrainItem> batch{{&scene, &qa}};
    TrainOptions opt;
    opt.dropout = 0.0;
    Rng rng(5);
    Adam adam({.lr = 0.01});
    double first = model.train_batch(batch, opt, rng).loss;
    for (int i = 0; i < 25; ++i) {
        adam.step(model.params());
        model.train_batch(batch, opt, rng);
    }
    adam.step(model.params());
    double last = model.train_batch(batch, opt, rng).loss;
    CHECK(last < first);
}

// ---- UpDown ----

TEST_CASE("updown attention and classifier") {
    ModelFixture f;
    UpDownModel model(f.vocab, f.dims, 4);

    SUBCASE("probabilities are a 21-way distribution") {
        CountPrediction cp = model.predict(f.scene(5), f.question());
        CHECK(cp.probs.size() == 21);
        double sum = 0.0;
        for (double p : cp.probs) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(cp.count >= 0);
        CHECK(cp.count <= 20);
    }
    SUBCASE("attention weights sum to one") {
        CountPrediction cp = model.predict(f.scene(6), f.question());
        double sum = 0.0;
        for (double a : cp.weights) sum += a;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("identical objects attract uniform attention and vhat is their mean") {
        SceneRecord s = f.scene(3);
        for (std::size_t i = 1; i < 3; ++i)
            for (std::size_t j = 0; j < f.dims.d_v; ++j)
                s.features.at(i, j) = s.features.at(0, j);
        Graph g(false);
        auto fwd = model.forward(g, s, f.question(), false, nullptr, 0.0);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(g.value(fwd.alpha)[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    }
    SUBCASE("a dominant attention logit concentrates on its object") {
        UpDownModel m2(f.vocab, f.dims, 4);
        SceneRecord s = f.scene(3);
        // crank the attention projection so score differences explode
        for (std::size_t i = 0; i < m2.att_proj.w->value.size(); ++i)
            m2.att_proj.w->value[i] *= 2000.0;
        Graph g(false);
        auto fwd = m2.forward(g, s, f.question(), false, nullptr, 0.0);
        double mx = 0.0;
        for (std::size_t i = 0; i < 3; ++i) mx = std::max(mx, g.value(fwd.alpha)[i]);
        CHECK(mx > 0.999);
    }
    SUBCASE("empty scenes bypass to count zero") {
        CountPrediction cp = model.predict(f.scene(0), f.question());
        CHECK(cp.count == 0);
        CHECK(cp.probs[0] == doctest::Approx(1.0));
    }
    SUBCASE("training loss equals cross entropy of the ground-truth class") {
        SceneRecord s = f.scene(4);
        QARecord qa;
        qa.tokens = f.question();
        qa.gt_count = 3;
        Graph g(true);
        auto fwd = model.forward(g, s, qa.tokens, false, nullptr, 0.0);
        double expect = -std::log(g.value(fwd.probs)[3]);
        std::vector<TrainItem> batch{{&s, &qa}};
        TrainOptions opt;
        opt.dropout = 0.0;
        Rng rng(6);
        BatchStats st = model.train_batch(batch, opt, rng);
        CHECK(st.loss == doctest::Approx(expect).epsilon(1e-9));
    }
}

// ---- IRLC pieces ----

TEST_CASE("irlc initial logits") {
    ModelFixture f;
    IrlcModel model(f.vocab, f.dims, 5);

    SUBCASE("zero projection weights give zero logits") {
        model.kappa_proj.w->value.fill(0);
        model.kappa_proj.b->value.fill(0);
        Graph g(false);
        auto fwd = model.forward(g, f.scene(4), f.question(), false, nullptr, 0.0);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(g.value(fwd.kappa0)[i] == doctest::Approx(0.0));
    }
    SUBCASE("object permutation permutes logits") {
        SceneRecord s = f.scene(3);
        SceneRecord perm = s;
        perm.image_id = "img-perm";
        std::swap(perm.boxes[0], perm.boxes[2]);
        for (std::size_t j = 0; j < f.dims.d_v; ++j)
            std::swap(perm.features.at(0, j), perm.features.at(2, j));
        Graph g(false);
        auto a = model.forward(g, s, f.question(), false, nullptr, 0.0);
        auto b = model.forward(g, perm, f.question(), false, nullptr, 0.0);
        CHECK(g.value(a.kappa0)[0] == doctest::Approx(g.value(b.kappa0)[2]).epsilon(1e-12));
        CHECK(g.value(a.kappa0)[2] == doctest::Approx(g.value(b.kappa0)[0]).epsilon(1e-12));
        CHECK(g.value(a.kappa0)[1] == doctest::Approx(g.value(b.kappa0)[1]).epsilon(1e-12));
    }
    SUBCASE("empty scene rolls straight to terminal") {
        Graph g(false);
        auto fwd = model.forward(g, f.scene(0), f.question(), false, nullptr, 0.0);
        CHECK(g.value(fwd.kappa0).size() == 0);
        Episode ep = greedy_rollout(g.value(fwd.kappa0), 0.0, g.value(fwd.rho));
        CHECK(ep.count == 0);
        CHECK(ep.actions == std::vector<int>{kTerminalAction});
        CHECK(ep.step_distributions.size() == 1);
        CHECK(ep.step_distributions[0] == std::vector<double>{1.0});
    }
}

TEST_CASE("irlc interactions") {
    ModelFixture f;
    IrlcModel model(f.vocab, f.dims, 5);

    SUBCASE("normalized self-similarity is one") {
        // diagonal pair rows carry v^T v == 1 for nonzero features
        SceneRecord s = f.scene(3);
        Graph g(false);
        auto fwd = model.forward(g, s, f.question(), false, nullptr, 0.0);
        // recompute the dot from raw features
        for (std::size_t i = 0; i < 3; ++i) {
            double norm = 0.0;
            for (std::size_t j = 0; j < f.dims.d_v; ++j)
                norm += s.features.at(i, j) * s.features.at(i, j);
            CHECK(norm > 0.0);
        }
        // the model caches pair rows; zeroing the MLP exposes only rho == 0,
        // so verify through the asymmetry case below instead
        CHECK(g.value(fwd.rho).rows() == 3);
    }
    SUBCASE("zero MLP weights collapse rho to zero and static selection") {
        model.inter_hidden_layer.w->value.fill(0);
        model.inter_hidden_layer.b->value.fill(0);
        model.inter_out_layer.w->value.fill(0);
        model.inter_out_layer.b->value.fill(0);
        Graph g(false);
        auto fwd = model.forward(g, f.scene(4), f.question(), false, nullptr, 0.0);
        for (std::size_t i = 0; i < 16; ++i) CHECK(g.value(fwd.rho)[i] == doctest::Approx(0.0));
        // static-logit selection: greedy picks positive logits in value order
        Episode ep = greedy_rollout(Tensor::vector({3, 2, 1, -1}), 0.0, zeros_rho(4));
        CHECK(ep.count == 3);
        CHECK(ep.selected == std::vector<int>{0, 1, 2});
    }
    SUBCASE("rho need not be symmetric for unequal-area pairs") {
        SceneRecord s;
        s.image_id = "asym";
        s.boxes = {{0, 0, 1, 1}, {0, 0, 2, 2}};
        s.width = 2.0;
        s.height = 2.0;
        s.features = Tensor({2, f.dims.d_v});
        s.features.at(0, 0) = 1.0;
        s.features.at(1, 1) = 1.0;
        Tensor rho = model.interaction_matrix(s, f.question());
        CHECK(std::fabs(rho.at(0, 1) - rho.at(1, 0)) > 1e-9);
    }
}

TEST_CASE("greedy rollout hand traces") {
    SUBCASE("suppression ends the count at one") {
        Tensor rho({2, 2});
        rho.at(0, 1) = -100.0;
        Episode ep = greedy_rollout(Tensor::vector({5, -5}), 0.0, rho);
        CHECK(ep.count == 1);
        CHECK(ep.selected == std::vector<int>{0});
        CHECK(ep.actions == std::vector<int>{0, kTerminalAction});
        CHECK(ep.kappa_trajectory.size() == 2);
        CHECK(ep.kappa_trajectory[1][1] == doctest::Approx(-105.0));
    }
    SUBCASE("all logits below the terminal stop immediately") {
        Episode ep = greedy_rollout(Tensor::vector({-1, -1, -1}), 0.0, zeros_rho(3));
        CHECK(ep.count == 0);
        CHECK(ep.selected.empty());
    }
    SUBCASE("static logits select in descending order until zeta wins") {
        Episode ep = greedy_rollout(Tensor::vector({3, 2, 1, -1}), 0.0, zeros_rho(4));
        CHECK(ep.count == 3);
        CHECK(ep.selected == std::vector<int>{0, 1, 2});
        CHECK(ep.actions.back() == kTerminalAction);
    }
    SUBCASE("cap forces termination") {
        Tensor kappa({25});
        kappa.fill(10.0);
        Episode ep = greedy_rollout(kappa, 0.0, zeros_rho(25));
        CHECK(ep.count == 20);
        CHECK(ep.actions.size() == 21);
        CHECK(ep.step_distributions.back()[25] == doctest::Approx(1.0));
    }
}

TEST_CASE("sampled rollout") {
    SUBCASE("no objects means count zero with probability one") {
        Graph g;
        Rng rng(1);
        Episode ep = sample_rollout(g, g.input(Tensor({0})), g.input(Tensor::scalar(0.0)),
                                    g.input(Tensor({0, 0})), rng);
        CHECK(ep.count == 0);
        CHECK(ep.step_distributions == std::vector<std::vector<double>>{{1.0}});
    }
    SUBCASE("single object at even odds is counted half the time") {
        Rng rng(77);
        int counted = 0;
        const int trials = 100000;
        for (int t = 0; t < trials; ++t) {
            Graph g(false);
            Episode ep = sample_rollout(g, g.input(Tensor::vector({0.0})),
                                        g.input(Tensor::scalar(0.0)), g.input(zeros_rho(1)), rng);
            counted += ep.count;
        }
        double freq = static_cast<double>(counted) / trials;
        CHECK(freq == doctest::Approx(0.5).epsilon(0.02));
        CHECK(std::fabs(freq - 0.5) < 0.01);
    }
    SUBCASE("masking keeps every sampled episode free of repeats") {
        Rng rng(13);
        for (int t = 0; t < 500; ++t) {
            std::size_t n = 1 + rng.uniform_index(6);
            Graph g(false);
            Episode ep = sample_rollout(g, g.input(test::random_tensor({n}, rng, 2.0)),
                                        g.input(Tensor::scalar(rng.uniform(-1, 1))),
                                        g.input(test::random_tensor({n, n}, rng, 1.0)), rng);
            std::vector<bool> seen(n, false);
            for (int a : ep.selected) {
                CHECK(!seen[static_cast<std::size_t>(a)]);
                seen[static_cast<std::size_t>(a)] = true;
            }
        }
    }
}

TEST_CASE("self-critical loss") {
    SUBCASE("matching counts zero the loss") {
        Graph g;
        Rng rng(3);
        Var kappa = g.input(Tensor::vector({5.0}));
        Var zeta = g.input(Tensor::scalar(0.0));
        Var rho = g.input(zeros_rho(1));
        Episode sampled = sample_rollout(g, kappa, zeta, rho, rng);
        Episode greedy = greedy_rollout(g.value(kappa), 0.0, g.value(rho));
        // kappa = 5 makes both count 1 nearly surely
        REQUIRE(sampled.count == greedy.count);
        Var loss = selfcritical_loss(g, sampled, greedy, 0);
        CHECK(g.value(loss).item() == doctest::Approx(0.0));
    }
    SUBCASE("direct evaluation of the reward-weighted log-probability") {
        // build an episode whose sum of log p is known exactly
        Graph g;
        Episode sampled;
        sampled.recorded = true;
        sampled.count = 1;
        Var p = g.input(Tensor::vector({std::exp(-2.0), 1.0 - std::exp(-2.0)}));
        sampled.step_logprobs.push_back(g.log_op(g.pick(p, 0)));  // log p = -2
        Episode greedy;
        greedy.count = 2;
        // gt 0: E_greedy = 2, E_sampled = 1, R = 1; loss = -(1)(-2) = 2
        Var loss = selfcritical_loss(g, sampled, greedy, 0);
        CHECK(g.value(loss).item() == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("entropy penalty") {
    Graph g;
    SUBCASE("deterministic steps contribute nothing") {
        Episode ep;
        ep.recorded = true;
        ep.step_dists.push_back(g.input(Tensor::vector({1.0})));
        Var pen = entropy_penalty(g, ep);
        CHECK(g.value(pen).item() == doctest::Approx(0.0));
    }
    SUBCASE("a uniform step is minus its entropy") {
        Episode ep;
        ep.recorded = true;
        ep.step_dists.push_back(g.input(Tensor::vector({1.0 / 3, 1.0 / 3, 1.0 / 3})));
        Var pen = entropy_penalty(g, ep);
        CHECK(g.value(pen).item() == doctest::Approx(-std::log(3.0)).epsilon(1e-12));
    }
    SUBCASE("a step against the penalty increases the policy entropy") {
        Parameter kappa("kappa", Tensor::vector({1.5, -0.5}));
        Parameter zeta("zeta", Tensor::scalar(0.0));
        auto first_step_entropy = [&]() {
            Graph gg(false);
            Var p = gg.softmax(gg.concat(gg.param(kappa), gg.param(zeta)));
            double h = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                double v = gg.value(p)[i];
                h -= v * std::log(v);
            }
            return h;
        };
        double before = first_step_entropy();
        Graph gg(true);
        Episode ep = forced_rollout(gg, gg.param(kappa), gg.param(zeta), gg.input(zeros_rho(2)),
                                    {0});
        gg.backward(entropy_penalty(gg, ep));
        for (std::size_t i = 0; i < 2; ++i) kappa.value[i] -= 0.05 * kappa.grad[i];
        zeta.value[0] -= 0.05 * zeta.grad[0];
        CHECK(first_step_entropy() > before);
    }
}

TEST_CASE("interaction penalty") {
    Graph g;
    SUBCASE("zero interactions cost nothing") {
        Episode ep;
        ep.selected = {0, 1};
        Var pen = interaction_penalty(g, ep, g.input(zeros_rho(2)));
        CHECK(g.value(pen).item() == doctest::Approx(0.0));
    }
    SUBCASE("one selection pays its mean Huber row magnitude") {
        Episode ep;
        ep.selected = {0};
        Tensor rho({2, 2});
        rho.at(0, 0) = 1.0;
        rho.at(0, 1) = 1.0;
        Var pen = interaction_penalty(g, ep, g.input(rho));
        CHECK(g.value(pen).item() == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("no selections cost nothing") {
        Episode ep;
        Var pen = interaction_penalty(g, ep, g.input(zeros_rho(3)));
        CHECK(g.value(pen).item() == doctest::Approx(0.0));
    }
}

namespace {

/// Independent probability of an action sequence under the rollout policy:
/// masked softmax over remaining logits plus the terminal, with the kappa
/// update applied after each selection. Plain double math, no tape.
double sequence_probability(const Tensor& kappa0, double zeta, const Tensor& rho,
                            const std::vector<int>& objects, int cap) {
    std::size_t n = kappa0.size();
    std::vector<double> kappa(kappa0.data());
    std::vector<bool> used(n, false);
    double prob = 1.0;
    std::size_t step = 0;
    auto step_prob = [&](int action) {
        double mx = zeta;
        for (std::size_t i = 0; i < n; ++i)
            if (!used[i]) mx = std::max(mx, kappa[i]);
        double z = std::exp(zeta - mx);
        for (std::size_t i = 0; i < n; ++i)
            if (!used[i]) z += std::exp(kappa[i] - mx);
        double num = action < 0 ? std::exp(zeta - mx)
                                : std::exp(kappa[static_cast<std::size_t>(action)] - mx);
        return num / z;
    };
    for (int a : objects) {
        prob *= step_prob(a);
        used[static_cast<std::size_t>(a)] = true;
        for (std::size_t j = 0; j < n; ++j) kappa[j] += rho.at(static_cast<std::size_t>(a), j);
        ++step;
    }
    if (static_cast<int>(objects.size()) < std::min<int>(static_cast<int>(n), cap))
        prob *= step_prob(kTerminalAction);
    return prob;
}

void enumerate_sequences(std::size_t n, std::vector<int>& prefix,
                         std::vector<std::vector<int>>& out, int cap) {
    if (static_cast<int>(prefix.size()) <= cap) out.push_back(prefix);
    if (static_cast<int>(prefix.size()) == cap) return;
    for (int a = 0; a < static_cast<int>(n); ++a) {
        if (std::find(prefix.begin(), prefix.end(), a) != prefix.end()) continue;
        prefix.push_back(a);
        enumerate_sequences(n, prefix, out, cap);
        prefix.pop_back();
    }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return num / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> collect_grads(const std::vector<Parameter*>& params) {
    std::vector<double> g;
    for (Parameter* p : params)
        for (std::size_t i = 0; i < p->grad.size(); ++i) g.push_back(p->grad[i]);
    return g;
}

}  // namespace

TEST_CASE("self-critical expected gradient matches exhaustive enumeration") {
    const int n = 2, cap = 2, gt = 1;
    Parameter kappa("kappa", Tensor::vector({0.4, -0.3}));
    Parameter zeta("zeta", Tensor::scalar(0.1));
    Parameter rho("rho", Tensor::matrix(2, 2, {0.0, -0.6, 0.3, 0.0}));
    std::vector<Parameter*> params{&kappa, &zeta, &rho};

    Episode greedy = greedy_rollout(kappa.value, zeta.value.item(), rho.value, cap);

    std::vector<std::vector<int>> sequences;
    std::vector<int> prefix;
    enumerate_sequences(n, prefix, sequences, cap);
    REQUIRE(sequences.size() == 5);  // {}, {0}, {1}, {0,1}, {1,0}

    for (Parameter* p : params) p->zero_grad();
    double total_prob = 0.0;
    for (const auto& seq : sequences) {
        double prob =
            sequence_probability(kappa.value, zeta.value.item(), rho.value, seq, cap);
        total_prob += prob;
        Graph g(true);
        Episode ep = forced_rollout(g, g.param(kappa), g.param(zeta), g.param(rho), seq, cap);
        // the tape's own step probabilities must agree with the oracle's
        double tape_prob = 1.0;
        for (Var lp : ep.step_logprobs) tape_prob *= std::exp(g.value(lp).item());
        REQUIRE(tape_prob == doctest::Approx(prob).epsilon(1e-9));
        Var loss = selfcritical_loss(g, ep, greedy, gt);
        g.backward(g.scale(loss, prob));
    }
    REQUIRE(total_prob == doctest::Approx(1.0).epsilon(1e-9));
    std::vector<double> exact = collect_grads(params);

    for (Parameter* p : params) p->zero_grad();
    Rng rng(2024);
    const int samples = 10000;
    for (int s = 0; s < samples; ++s) {
        Graph g(true);
        Episode ep = sample_rollout(g, g.param(kappa), g.param(zeta), g.param(rho), rng, cap);
        Var loss = selfcritical_loss(g, ep, greedy, gt);
        g.backward(g.scale(loss, 1.0 / samples));
    }
    std::vector<double> mc = collect_grads(params);

    CHECK(cosine(exact, mc) > 0.99);
}

TEST_CASE("episode invariants over random instances") {
    Rng rng(99);
    for (int t = 0; t < 2000; ++t) {
        std::size_t n = rng.uniform_index(7);
        Tensor kappa = test::random_tensor({n}, rng, 3.0);
        Tensor rho = test::random_tensor({n, n}, rng, 1.0);
        double zeta = rng.uniform(-2, 2);

        Episode greedy = greedy_rollout(kappa, zeta, rho);
        Graph g(false);
        std::uint64_t stream = rng.next_u64();
        Rng sample_rng(stream);
        Episode sampled = sample_rollout(g, g.input(kappa), g.input(Tensor::scalar(zeta)),
                                         g.input(rho), sample_rng);

        for (const Episode* ep : {&greedy, &sampled}) {
            CHECK(ep->count <= static_cast<int>(std::min<std::size_t>(n, 20)));
            CHECK(ep->count == static_cast<int>(ep->selected.size()));
            CHECK(ep->actions.size() == ep->selected.size() + 1);
            CHECK(ep->actions.back() == kTerminalAction);
            std::vector<bool> seen(n, false);
            for (int a : ep->selected) {
                CHECK(!seen[static_cast<std::size_t>(a)]);
                seen[static_cast<std::size_t>(a)] = true;
            }
            for (const auto& dist : ep->step_distributions) {
                double sum = 0.0;
                for (double p : dist) sum += p;
                CHECK(std::fabs(sum - 1.0) < 1e-12);
            }
        }

        // joint shift of [kappa, zeta] leaves the greedy actions and every
        // distribution unchanged
        double c = rng.uniform(-5, 5);
        Tensor shifted = kappa;
        for (std::size_t i = 0; i < n; ++i) shifted[i] += c;
        Episode shifted_greedy = greedy_rollout(shifted, zeta + c, rho);
        CHECK(shifted_greedy.actions == greedy.actions);
        REQUIRE(shifted_greedy.step_distributions.size() == greedy.step_distributions.size());
        for (std::size_t s = 0; s < greedy.step_distributions.size(); ++s)
            for (std::size_t i = 0; i < greedy.step_distributions[s].size(); ++i)
                CHECK(std::fabs(shifted_greedy.step_distributions[s][i] -
                                greedy.step_distributions[s][i]) < 1e-12);

        Graph g2(false);
        Rng sample_rng2(stream);
        Episode shifted_sampled =
            sample_rollout(g2, g2.input(shifted), g2.input(Tensor::scalar(zeta + c)),
                           g2.input(rho), sample_rng2);
        CHECK(shifted_sampled.actions == sampled.actions);
    }
}

TEST_CASE("irlc training step") {
    ModelFixture f;
    IrlcModel model(f.vocab, f.dims, 6);
    SceneRecord scene = f.scene(5);
    QARecord qa;
    qa.tokens = f.question();
    qa.gt_count = 2;
    std::vector<TrainItem> batch{{&scene, &qa}};
    TrainOptions opt;
    opt.dropout = 0.1;
    Rng rng(9);

    SUBCASE("loss is finite at random initialization") {
        BatchStats st = model.train_batch(batch, opt, rng);
        CHECK(std::isfinite(st.loss));
        CHECK(st.total == 1);
        CHECK(model.params().grads_finite());
    }
    SUBCASE("empty batches are rejected") {
        std::vector<TrainItem> empty;
        CHECK_THROWS(model.train_batch(empty, opt, rng));
    }
    SUBCASE("empty scenes take the degenerate path") {
        SceneRecord none = f.scene(0);
        QARecord qz;
        qz.tokens = f.question();
        qz.gt_count = 0;
        std::vector<TrainItem> b2{{&none, &qz}};
        BatchStats st = model.train_batch(b2, opt, rng);
        CHECK(std::isfinite(st.loss));
        CHECK(st.correct == 1);  // greedy count 0 == gt
    }
}

TEST_CASE("irlc prediction weights are exactly the selected objects") {
    ModelFixture f;
    IrlcModel model(f.vocab, f.dims, 8);
    CountPrediction cp = model.predict(f.scene(6), f.question());
    double sum = 0.0;
    for (double w : cp.weights) {
        CHECK((w == 0.0 || w == 1.0));
        sum += w;
    }
    CHECK(sum == doctest::Approx(cp.count));
    CHECK(cp.selected.size() == static_cast<std::size_t>(cp.count));
}

// ---- baselines ----

TEST_CASE("guess1") {
    ModelFixture f;
    Guess1Model model(f.vocab, f.dims, 1);
    QARecord a, b, c;
    a.gt_count = 2;
    b.gt_count = 2;
    c.gt_count = 7;
    SceneRecord s = f.scene(1);
    std::vector<TrainItem> train{{&s, &a}, {&s, &b}, {&s, &c}};
    model.fit(train);
    CHECK(model.mode() == 2);
    CHECK(model.predict(s, f.question()).count == 2);

    std::vector<TrainItem> empty;
    CHECK_THROWS(model.fit(empty));

    SUBCASE("ties break toward the smaller count") {
        QARecord d;
        d.gt_count = 7;
        std::vector<TrainItem> tied{{&s, &a}, {&s, &b}, {&s, &c}, {&s, &d}};
        model.fit(tied);
        CHECK(model.mode() == 2);
    }
}

TEST_CASE("lstm baseline") {
    ModelFixture f;
    LstmBaselineModel model(f.vocab, f.dims, 2);

    SUBCASE("zero weights predict the rounded clamped bias") {
        for (Parameter* p : model.params().all()) p->value.fill(0);
        model.head.b->value[0] = 2.4;
        CHECK(model.predict(f.scene(1), f.question()).count == 2);
        model.head.b->value[0] = 77.0;
        CHECK(model.predict(f.scene(1), f.question()).count == 20);
        model.head.b->value[0] = -3.0;
        CHECK(model.predict(f.scene(1), f.question()).count == 0);
    }
    SUBCASE("gradient check through the head") {
        auto run = [&](bool record) {
            Graph g(record);
            Var raw = model.forward_raw(g, f.question(), false, nullptr, 0.0);
            Var loss = g.huber_op(g.abs_op(g.sub(raw, g.input(Tensor::scalar(3.0)))));
            double v = g.value(loss).item();
            if (record) g.backward(loss);
            return v;
        };
        CHECK(test::max_grad_rel_error({model.head.w, model.head.b}, run) < 1e-5);
    }
}

TEST_SUITE_END();
