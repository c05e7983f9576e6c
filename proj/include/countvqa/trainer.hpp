#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "countvqa/config.hpp"
#include "countvqa/counters.hpp"
#include "countvqa/data.hpp"
#include "countvqa/metrics.hpp"

namespace cvqa {

/// Scenes + splits + vocabulary, ready for a run. Scenes own their storage;
/// QARecords reference them by image id.
struct PreparedData {
    std::vector<SceneRecord> scenes;
    std::unordered_map<std::string, const SceneRecord*> scene_by_id;
    std::vector<QARecord> train, dev, test;
    std::vector<std::string> categories;  // nonempty when scenes are labeled
    Vocabulary vocab;

    const SceneRecord& scene_of(const QARecord& qa) const;
    const std::vector<QARecord>& split(const std::string& name) const;
};

PreparedData prepare_data(const RunConfig& cfg);

/// Builds the configured model over the prepared vocabulary (GloVe rows
/// loaded when configured) and fits baselines that need fitting.
std::unique_ptr<CountingModel> build_model(const RunConfig& cfg, const PreparedData& data);

struct SplitMetrics {
    double accuracy = 0.0;
    double rmse_value = 0.0;
    double exact = 0.0;
    std::size_t n = 0;
};

SplitMetrics evaluate_split(CountingModel& model, const PreparedData& data,
                            const std::vector<QARecord>& split);

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
    double dev_accuracy = 0.0;
    double dev_rmse = 0.0;
    double lr = 0.0;
};

struct TrainOutcome {
    std::string out_dir, checkpoint_path, config_path, log_path, manifest_path;
    int best_epoch = 0;
    double best_dev_accuracy = 0.0;
    double best_dev_rmse = 0.0;
    std::vector<EpochLog> log;
};

/// Full training run: schedules, early stopping on dev accuracy, best-dev
/// checkpointing, per-epoch CSV log, resolved config + output manifest.
TrainOutcome cmd_train(RunConfig cfg);

struct EvalOutcome {
    SplitMetrics metrics;
    std::string metrics_csv, dump_jsonl;
    std::vector<MetricRow> rows;
};

/// Loads a checkpoint (name+shape validated), evaluates one split, writes
/// the metrics CSV and the per-question grounded dump.
EvalOutcome cmd_eval(RunConfig cfg, const std::string& checkpoint_path, const std::string& split,
                     const std::string& out_dir);

struct FilterOutcome {
    std::map<std::string, std::size_t> histogram;  // reason code -> count
    std::size_t kept = 0, total = 0;
    std::string keep_manifest, histogram_csv;
};

FilterOutcome cmd_filter(const std::string& questions_file, const std::string& annotations_file,
                         const std::string& out_dir);

struct SynthOutcome {
    std::string features_file, labels_file;
    std::string train_questions, train_annotations;
    std::string dev_questions, dev_annotations;
    std::string captions_file, manifest_path;
};

/// Materializes the synthetic dataset into the feature container + VQA-format
/// QA files (+ labels and region captions), so training can run the same
/// files path as real data.
SynthOutcome cmd_synth(RunConfig cfg);

struct SweepCell {
    double entropy_weight = 0.0;
    double interaction_weight = 0.0;
    double dev_accuracy = 0.0;
};

struct SweepOutcome {
    std::vector<SweepCell> cells;
    std::string csv_path;
};

SweepOutcome cmd_sweep(RunConfig cfg, const std::vector<double>& entropy_grid,
                       const std::vector<double>& interaction_grid);

/// VQA 2.0 schema writers (used by cmd_synth and fixtures).
void write_vqa_files(const std::vector<QARecord>& qa, const std::string& questions_path,
                     const std::string& annotations_path);

void write_region_captions(const std::vector<SceneRecord>& scenes, const std::string& path);

}  // namespace cvqa
