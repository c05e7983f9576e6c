#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "countvqa/records.hpp"

namespace cvqa {

/// Standard VQA accuracy against the ten human answers, averaged over the
/// ten leave-one-out subsets with min(matches/3, 1) inside each subset.
double vqa_accuracy(int predicted, const std::vector<std::string>& answers);

double rmse(const std::vector<int>& predictions, const std::vector<int>& gts);

// ---- grounding quality ----

/// Per-object count weights for one (scene, question) pair. SoftCount
/// reports its sigmoid values, IRLC its 0/1 selections.
using CountWeightFn =
    std::function<std::vector<double>(const SceneRecord&, const std::vector<std::string>&)>;

/// Embedding for a category word; the metric L2-normalizes it. A missing
/// category embedding is an error.
using EmbeddingFn = std::function<std::vector<double>(const std::string&)>;

struct GroundingQuality {
    std::vector<std::string> categories;
    std::vector<std::optional<double>> score;  // nullopt = UNDEFINED (zero net count)
};

/// For each category: templated questions over every labeled scene that
/// contains it; proposals are assigned to the gt category of their best
/// IoU > 0.5 match (else background, embedded as the zero vector); the
/// score is the count-weighted mean semantic similarity.
GroundingQuality grounding_quality(const std::vector<const SceneRecord*>& scenes,
                                   const std::vector<std::string>& categories,
                                   const CountWeightFn& weights, const EmbeddingFn& embedding);

// ---- per-bin report ----

struct BinRow {
    int bin = 0;
    double accuracy = 0.0;
    double rmse_value = 0.0;
    std::size_t n = 0;
};

/// Accuracy and RMSE per frequency bin 1..6; empty bins report n = 0.
std::vector<BinRow> per_bin_report(const std::vector<int>& predictions,
                                   const std::vector<QARecord>& eval_split);

// ---- UpDown ordinality ----

struct OrdinalityStats {
    std::vector<int> gaps;  // |top1 - top2| per prediction
    // P(gap <= g), g = 0..20, split by predicted count < 5 vs >= 5
    std::vector<double> cdf_small, cdf_large;
    std::size_t n_small = 0, n_large = 0;
    // mean probability vector grouped by predicted count
    std::vector<std::vector<double>> mean_probs_by_count;  // [21][21]
    std::vector<std::size_t> count_group_sizes;            // [21]
};

OrdinalityStats ordinality_gap(const std::vector<std::vector<double>>& probability_vectors);

// ---- paired t-test ----

struct TTestResult {
    double t = 0.0;
    double p = 1.0;  // two-sided
    std::size_t df = 0;
};

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// ---- CSV report ----

struct MetricRow {
    std::string split, model, metric, scope;
    double value = 0.0;
    std::size_t n = 0;
    bool defined = true;  // UNDEFINED rows keep their scope but no value
};

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path);

}  // namespace cvqa
