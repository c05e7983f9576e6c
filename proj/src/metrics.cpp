#include "countvqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <boost/math/distributions/students_t.hpp>

#include "countvqa/data.hpp"
#include "countvqa/language.hpp"
#include "countvqa/synth.hpp"

namespace cvqa {

double vqa_accuracy(int predicted, const std::vector<std::string>& answers) {
    detail::require(answers.size() == 10, "vqa_accuracy: exactly 10 human answers required");
    int k = 0;
    for (const auto& a : answers) {
        auto v = parse_count_answer(a);
        if (v && *v == predicted) ++k;
    }
    // Closed form of the 10-choose-9 average: leaving out a matching answer
    // gives k-1 matches, leaving out any other gives k.
    double when_match_out = k > 0 ? std::min((k - 1) / 3.0, 1.0) : 0.0;
    double when_other_out = std::min(k / 3.0, 1.0);
    return (k * when_match_out + (10 - k) * when_other_out) / 10.0;
}

double rmse(const std::vector<int>& predictions, const std::vector<int>& gts) {
    detail::require(predictions.size() == gts.size() && !predictions.empty(),
                    "rmse: nonempty equal-length inputs required");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double d = predictions[i] - gts[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(predictions.size()));
}

GroundingQuality grounding_quality(const std::vector<const SceneRecord*>& scenes,
                                   const std::vector<std::string>& categories,
                                   const CountWeightFn& weights, const EmbeddingFn& embedding) {
    auto normalized = [&embedding](const std::string& word) {
        std::vector<double> e = embedding(word);
        detail::require(!e.empty(), "grounding_quality: missing category embedding: " + word);
        double n = 0.0;
        for (double v : e) n += v * v;
        n = std::sqrt(n);
        if (n > 0.0)
            for (double& v : e) v /= n;
        return e;
    };

    std::vector<std::vector<double>> cat_emb;
    cat_emb.reserve(categories.size());
    for (const auto& c : categories) cat_emb.push_back(normalized(c));

    GroundingQuality out;
    out.categories = categories;
    out.score.resize(categories.size());

    for (std::size_t q = 0; q < categories.size(); ++q) {
        double num = 0.0, den = 0.0;
        std::vector<std::string> tokens =
            tokenize("how many " + pluralize(categories[q]) + " are there");
        for (const SceneRecord* scene : scenes) {
            bool has_label = false;
            for (const auto& obj : scene->gt_objects)
                if (obj.category == static_cast<int>(q)) {
                    has_label = true;
                    break;
                }
            if (!has_label) continue;

            std::vector<double> w = weights(*scene, tokens);
            detail::require(w.size() == scene->object_count(),
                            "grounding_quality: weight count mismatch");
            for (std::size_t i = 0; i < w.size(); ++i) {
                den += w[i];
                // best-IoU gt assignment; <= 0.5 falls to background (zero embedding)
                int cat = kNoLabel;
                double best = 0.5;
                for (const auto& obj : scene->gt_objects) {
                    double v = iou(scene->boxes[i], obj.box);
                    if (v > best) {
                        best = v;
                        cat = obj.category;
                    }
                }
                if (cat == kNoLabel) continue;
                const auto& ek = cat_emb[static_cast<std::size_t>(cat)];
                const auto& eq = cat_emb[q];
                double dot = 0.0;
                for (std::size_t d = 0; d < ek.size() && d < eq.size(); ++d) dot += ek[d] * eq[d];
                num += w[i] * dot;
            }
        }
        out.score[q] = den > 0.0 ? std::optional<double>(num / den) : std::nullopt;
    }
    return out;
}

std::vector<BinRow> per_bin_report(const std::vector<int>& predictions,
                                   const std::vector<QARecord>& eval_split) {
    detail::require(predictions.size() == eval_split.size(), "per_bin_report: size mismatch");
    std::vector<BinRow> rows(6);
    std::vector<double> acc_sum(6, 0.0), sq_sum(6, 0.0);
    for (std::size_t i = 0; i < eval_split.size(); ++i) {
        int bin = eval_split[i].bin;
        detail::require(bin >= 1 && bin <= 6, "per_bin_report: unassigned bin");
        std::size_t b = static_cast<std::size_t>(bin - 1);
        rows[b].bin = bin;
        ++rows[b].n;
        acc_sum[b] += vqa_accuracy(predictions[i], eval_split[i].human_answers);
        double d = predictions[i] - eval_split[i].gt_count;
        sq_sum[b] += d * d;
    }
    for (std::size_t b = 0; b < 6; ++b) {
        rows[b].bin = static_cast<int>(b) + 1;
        if (rows[b].n > 0) {
            rows[b].accuracy = acc_sum[b] / static_cast<double>(rows[b].n);
            rows[b].rmse_value = std::sqrt(sq_sum[b] / static_cast<double>(rows[b].n));
        }
    }
    return rows;
}

OrdinalityStats ordinality_gap(const std::vector<std::vector<double>>& probability_vectors) {
    OrdinalityStats st;
    st.mean_probs_by_count.assign(21, std::vector<double>(21, 0.0));
    st.count_group_sizes.assign(21, 0);
    std::vector<std::size_t> small_hist(21, 0), large_hist(21, 0);
    for (const auto& p : probability_vectors) {
        detail::require(p.size() == 21, "ordinality_gap: vectors must have length 21");
        std::size_t top1 = 0;
        for (std::size_t i = 1; i < p.size(); ++i)
            if (p[i] > p[top1]) top1 = i;
        std::size_t top2 = top1 == 0 ? 1 : 0;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (i != top1 && p[i] > p[top2]) top2 = i;
        int gap = std::abs(static_cast<int>(top1) - static_cast<int>(top2));
        st.gaps.push_back(gap);
        if (top1 < 5) {
            ++small_hist[static_cast<std::size_t>(gap)];
            ++st.n_small;
        } else {
            ++large_hist[static_cast<std::size_t>(gap)];
            ++st.n_large;
        }
        for (std::size_t i = 0; i < 21; ++i) st.mean_probs_by_count[top1][i] += p[i];
        ++st.count_group_sizes[top1];
    }
    for (std::size_t c = 0; c < 21; ++c)
        if (st.count_group_sizes[c] > 0)
            for (auto& v : st.mean_probs_by_count[c])
                v /= static_cast<double>(st.count_group_sizes[c]);

    auto cdf_of = [](const std::vector<std::size_t>& hist, std::size_t n) {
        std::vector<double> cdf(21, 0.0);
        double cum = 0.0;
        for (std::size_t g = 0; g < 21; ++g) {
            cum += static_cast<double>(hist[g]);
            cdf[g] = n > 0 ? cum / static_cast<double>(n) : 0.0;
        }
        return cdf;
    };
    st.cdf_small = cdf_of(small_hist, st.n_small);
    st.cdf_large = cdf_of(large_hist, st.n_large);
    return st;
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    detail::require(a.size() == b.size() && a.size() >= 2,
                    "paired_ttest: need at least two paired samples");
    std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);

    TTestResult res;
    res.df = n - 1;
    if (var == 0.0) {
        res.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
        res.p = mean == 0.0 ? 1.0 : 0.0;
        return res;
    }
    res.t = mean / std::sqrt(var / static_cast<double>(n));
    boost::math::students_t_distribution<double> dist(static_cast<double>(res.df));
    res.p = 2.0 * boost::math::cdf(dist, -std::fabs(res.t));
    return res;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write metrics csv " + path);
    os << "split,model,metric,scope,value,n\n";
    for (const auto& r : rows) {
        os << r.split << ',' << r.model << ',' << r.metric << ',' << r.scope << ',';
        if (r.defined)
            os << r.value;
        else
            os << "undefined";
        os << ',' << r.n << "\n";
    }
}

}  // namespace cvqa
