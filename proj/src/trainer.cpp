#include "countvqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "countvqa/features_io.hpp"
#include "countvqa/grounding.hpp"

namespace cvqa {

namespace fs = std::filesystem;
using nlohmann::json;

const SceneRecord& PreparedData::scene_of(const QARecord& qa) const {
    auto it = scene_by_id.find(qa.image_id);
    detail::require(it != scene_by_id.end(), "no scene for image id " + qa.image_id);
    return *it->second;
}

const std::vector<QARecord>& PreparedData::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "dev") return dev;
    if (name == "test") return test;
    throw std::invalid_argument("unknown split: " + name);
}

namespace {

void index_scenes(PreparedData& d) {
    d.scene_by_id.clear();
    for (const SceneRecord& s : d.scenes) d.scene_by_id[s.image_id] = &s;
}

void build_vocab(PreparedData& d) {
    for (const QARecord& qa : d.train)
        for (const auto& t : qa.tokens) d.vocab.add(t);
    for (const SceneRecord& s : d.scenes)
        for (const CaptionRecord& c : s.captions)
            for (const auto& t : c.tokens) d.vocab.add(t);
    for (const auto& c : d.categories) d.vocab.add(c);
}

PreparedData prepare_synth(const RunConfig& cfg) {
    PreparedData d;
    std::size_t n_train = static_cast<std::size_t>(cfg.synth_train_scenes);
    std::size_t n_dev = static_cast<std::size_t>(cfg.synth_dev_scenes);
    SynthDataset all = generate_synthetic_dataset(cfg.synth, n_train + n_dev);
    d.scenes = std::move(all.scenes);
    d.categories = all.categories;
    d.train.assign(all.qa.begin(), all.qa.begin() + static_cast<long>(n_train));
    d.dev.assign(all.qa.begin() + static_cast<long>(n_train), all.qa.end());
    if (!d.train.empty()) assign_frequency_bins(d.train, d.dev);
    index_scenes(d);
    build_vocab(d);
    return d;
}

PreparedData prepare_files(const RunConfig& cfg) {
    PreparedData d;
    d.scenes = read_features(cfg.features_file);
    if (!cfg.labels_file.empty()) {
        LabelFile labels = read_labels(cfg.labels_file);
        d.categories = labels.categories;
        apply_labels(labels, d.scenes);
    }

    SplitInputs in;
    in.seed = cfg.seed;
    in.test_size = static_cast<std::size_t>(cfg.test_size);
    in.vqa_train = load_vqa_annotations(cfg.train_questions, cfg.train_annotations);
    in.vqa_val = load_vqa_annotations(cfg.val_questions, cfg.val_annotations);
    for (const RawQA& raw : in.vqa_train) in.vqa_train_image_ids.push_back(raw.image_id);
    if (!cfg.vg_questions.empty())
        in.vg_train = load_vqa_annotations(cfg.vg_questions, cfg.vg_annotations);
    if (!cfg.dev_manifest.empty()) in.dev_manifest = read_manifest(cfg.dev_manifest);
    if (!cfg.test_manifest.empty()) in.test_manifest = read_manifest(cfg.test_manifest);

    DatasetSplits splits = build_howmany_splits(in);
    d.train = std::move(splits.train);
    d.dev = std::move(splits.dev);
    d.test = std::move(splits.test);
    index_scenes(d);

    if (!cfg.captions_file.empty()) {
        auto caps = load_region_captions(cfg.captions_file);
        for (SceneRecord& s : d.scenes) {
            auto it = caps.find(s.image_id);
            if (it == caps.end()) continue;
            for (CaptionRecord cap : it->second) {
                cap.assigned = assign_caption(cap.region, s);
                s.captions.push_back(std::move(cap));
            }
        }
    }
    build_vocab(d);
    return d;
}

std::vector<TrainItem> to_items(const PreparedData& d, const std::vector<QARecord>& qa) {
    std::vector<TrainItem> items;
    items.reserve(qa.size());
    for (const QARecord& q : qa) items.push_back({&d.scene_of(q), &q});
    return items;
}

void write_file_manifest(const std::string& out_dir, const std::vector<std::string>& files) {
    std::ofstream os(out_dir + "/manifest.txt");
    for (const auto& f : files) os << f << "\n";
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
    RunConfig resolved = cfg;
    apply_profile(resolved);
    return resolved.data == "synth" ? prepare_synth(resolved) : prepare_files(resolved);
}

std::unique_ptr<CountingModel> build_model(const RunConfig& cfg, const PreparedData& data) {
    ModelDims dims;
    dims.d_emb = cfg.d_emb;
    dims.d_hid = cfg.d_hid;
    dims.score_dim = cfg.score_dim;
    dims.d_v = cfg.d_v;
    dims.q_compress = cfg.q_compress;
    dims.inter_hidden = cfg.inter_hidden;
    auto model = make_model(cfg.model, data.vocab, dims, cfg.seed, cfg.grounding);
    if (!cfg.glove_file.empty()) {
        auto* table = model->params().find("embed.table");
        if (table) load_glove(cfg.glove_file, data.vocab, *table);
    }
    return model;
}

SplitMetrics evaluate_split(CountingModel& model, const PreparedData& data,
                            const std::vector<QARecord>& split) {
    detail::require(!split.empty(), "evaluate_split: empty split");
    SplitMetrics m;
    std::vector<int> preds, gts;
    preds.reserve(split.size());
    for (const QARecord& qa : split) {
        CountPrediction cp = model.predict(data.scene_of(qa), qa.tokens);
        preds.push_back(cp.count);
        gts.push_back(qa.gt_count);
        m.accuracy += vqa_accuracy(cp.count, qa.human_answers);
        m.exact += cp.count == qa.gt_count ? 1.0 : 0.0;
    }
    m.n = split.size();
    m.accuracy /= static_cast<double>(m.n);
    m.exact /= static_cast<double>(m.n);
    m.rmse_value = rmse(preds, gts);
    return m;
}

TrainOutcome cmd_train(RunConfig cfg) {
    apply_profile(cfg);
    auto errors = validate_config(cfg);
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw std::runtime_error(msg);
    }
    fs::create_directories(cfg.out_dir);

    TrainOutcome out;
    out.out_dir = cfg.out_dir;
    out.config_path = cfg.out_dir + "/config.json";
    out.checkpoint_path = cfg.out_dir + "/checkpoint.bin";
    out.log_path = cfg.out_dir + "/train_log.csv";
    out.manifest_path = cfg.out_dir + "/manifest.txt";
    write_config(cfg, out.config_path);

    PreparedData data = prepare_data(cfg);
    detail::require(!data.train.empty(), "training split is empty");
    detail::require(!data.dev.empty(), "dev split is empty");
    auto model = build_model(cfg, data);

    if (auto* g1 = dynamic_cast<Guess1Model*>(model.get())) {
        g1->fit(to_items(data, data.train));
        SplitMetrics dev = evaluate_split(*model, data, data.dev);
        save_checkpoint(model->params(), out.checkpoint_path);
        EpochLog log{0, 0.0, 0.0, dev.accuracy, dev.rmse_value, 0.0};
        out.log.push_back(log);
        out.best_epoch = 0;
        out.best_dev_accuracy = dev.accuracy;
        out.best_dev_rmse = dev.rmse_value;
        std::ofstream os(out.log_path);
        os << "epoch,loss,train_accuracy,dev_accuracy,dev_rmse,lr\n";
        os << "0,0,0," << dev.accuracy << ',' << dev.rmse_value << ",0\n";
        write_file_manifest(cfg.out_dir, {"config.json", "checkpoint.bin", "train_log.csv"});
        return out;
    }

    Adam adam({cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
    TrainOptions opt;
    opt.dropout = cfg.dropout;
    opt.irlc_samples = cfg.irlc_samples;
    opt.entropy_weight = cfg.entropy_weight;
    opt.interaction_weight = cfg.interaction_weight;
    opt.grounding = cfg.grounding;
    opt.grounding_weight = cfg.grounding_weight;
    opt.grounding_images = cfg.grounding_images;

    std::vector<TrainItem> train_items = to_items(data, data.train);

    std::ofstream log_os(out.log_path);
    log_os << "epoch,loss,train_accuracy,dev_accuracy,dev_rmse,lr\n";

    double best_dev = -1.0;
    double best_train_acc = -1.0;
    int plateau_count = 0, stall = 0;
    bool is_irlc = cfg.model == "irlc";

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng rng = Rng::derive(cfg.seed, {0xe90c4, static_cast<std::uint64_t>(epoch)});
        std::vector<std::size_t> order(train_items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t batches = 0, correct = 0, seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(),
                                        start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TrainItem> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train_items[order[i]]);
            BatchStats st;
            try {
                st = model->train_batch(batch, opt, rng);
            } catch (const std::exception& e) {
                throw std::runtime_error("epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(batches) + ": " + e.what());
            }
            if (!std::isfinite(st.loss))
                throw std::runtime_error("NaN loss in epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batches));
            adam.step(model->params());
            if (is_irlc) adam.config().lr *= cfg.iter_decay;
            loss_sum += st.loss;
            correct += st.correct;
            seen += st.total;
            ++batches;
        }
        double train_acc = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen)
                                    : 0.0;
        double epoch_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;

        // plateau-triggered decay for the supervised heads
        if (!is_irlc) {
            if (train_acc > best_train_acc) {
                best_train_acc = train_acc;
                plateau_count = 0;
            } else if (++plateau_count >= cfg.plateau_patience) {
                adam.config().lr *= cfg.plateau_decay;
                plateau_count = 0;
            }
        }

        SplitMetrics dev = evaluate_split(*model, data, data.dev);
        EpochLog row{epoch, epoch_loss, train_acc, dev.accuracy, dev.rmse_value,
                     adam.config().lr};
        out.log.push_back(row);
        log_os << epoch << ',' << epoch_loss << ',' << train_acc << ',' << dev.accuracy << ','
               << dev.rmse_value << ',' << adam.config().lr << "\n";
        log_os.flush();

        if (dev.accuracy > best_dev) {
            best_dev = dev.accuracy;
            out.best_epoch = epoch;
            out.best_dev_accuracy = dev.accuracy;
            out.best_dev_rmse = dev.rmse_value;
            save_checkpoint(model->params(), out.checkpoint_path);
            stall = 0;
        } else if (++stall >= cfg.patience) {
            break;
        }
    }
    write_file_manifest(cfg.out_dir, {"config.json", "checkpoint.bin", "train_log.csv"});
    return out;
}

namespace {

json dump_line(const QARecord& qa, const SceneRecord& scene, const CountPrediction& cp) {
    json j;
    j["question_id"] = qa.question_id;
    j["image_id"] = qa.image_id;
    j["question"] = qa.question;
    j["gt"] = qa.gt_count;
    j["prediction"] = cp.count;
    j["weights"] = cp.weights;
    auto boxes = json::array();
    for (const Box& b : scene.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    j["boxes"] = boxes;
    if (!cp.selected.empty() || !cp.weights.empty()) j["selected"] = cp.selected;
    if (!cp.probs.empty()) j["probs"] = cp.probs;
    return j;
}

}  // namespace

EvalOutcome cmd_eval(RunConfig cfg, const std::string& checkpoint_path, const std::string& split,
                     const std::string& out_dir) {
    apply_profile(cfg);
    fs::create_directories(out_dir);
    PreparedData data = prepare_data(cfg);
    const std::vector<QARecord>& qa = data.split(split);
    detail::require(!qa.empty(), "cmd_eval: split '" + split + "' is empty");

    auto model = build_model(cfg, data);
    load_checkpoint(model->params(), checkpoint_path);
    if (auto* g1 = dynamic_cast<Guess1Model*>(model.get())) (void)g1;  // mode comes from checkpoint

    EvalOutcome out;
    out.metrics_csv = out_dir + "/metrics_" + split + ".csv";
    out.dump_jsonl = out_dir + "/dump_" + split + ".jsonl";

    std::ofstream dump(out.dump_jsonl);
    std::vector<int> preds, gts;
    std::vector<std::vector<double>> prob_vectors;
    double acc_sum = 0.0;
    for (const QARecord& q : qa) {
        const SceneRecord& scene = data.scene_of(q);
        CountPrediction cp = model->predict(scene, q.tokens);
        preds.push_back(cp.count);
        gts.push_back(q.gt_count);
        acc_sum += vqa_accuracy(cp.count, q.human_answers);
        if (!cp.probs.empty()) prob_vectors.push_back(cp.probs);
        dump << dump_line(q, scene, cp).dump() << "\n";
    }
    out.metrics.n = qa.size();
    out.metrics.accuracy = acc_sum / static_cast<double>(qa.size());
    out.metrics.rmse_value = rmse(preds, gts);

    std::vector<MetricRow> rows;
    rows.push_back({split, cfg.model, "accuracy", "all", out.metrics.accuracy, qa.size(), true});
    rows.push_back({split, cfg.model, "rmse", "all", out.metrics.rmse_value, qa.size(), true});
    bool binned = std::all_of(qa.begin(), qa.end(), [](const QARecord& q) { return q.bin >= 1; });
    if (binned) {
        for (const BinRow& b : per_bin_report(preds, qa)) {
            std::string scope = "bin" + std::to_string(b.bin);
            rows.push_back({split, cfg.model, "accuracy", scope, b.accuracy, b.n, true});
            rows.push_back({split, cfg.model, "rmse", scope, b.rmse_value, b.n, true});
        }
    }

    bool labeled = !data.categories.empty() &&
                   std::any_of(data.scenes.begin(), data.scenes.end(),
                               [](const SceneRecord& s) { return !s.gt_objects.empty(); });
    if (labeled && (cfg.model == "softcount" || cfg.model == "irlc")) {
        std::vector<const SceneRecord*> eval_scenes;
        {
            std::set<std::string> ids;
            for (const QARecord& q : qa) ids.insert(q.image_id);
            for (const std::string& id : ids) eval_scenes.push_back(data.scene_by_id.at(id));
        }
        CountWeightFn weights = [&model](const SceneRecord& s,
                                         const std::vector<std::string>& tokens) {
            return model->predict(s, tokens).weights;
        };
        Parameter* table = model->params().find("embed.table");
        EmbeddingFn emb = [&data, table](const std::string& word) {
            auto idx = data.vocab.find(word);
            detail::require(idx.has_value(), "missing category embedding: " + word);
            std::vector<double> row(table->value.cols());
            for (std::size_t j = 0; j < row.size(); ++j)
                row[j] = table->value.at(static_cast<std::size_t>(*idx), j);
            return row;
        };
        GroundingQuality gq = grounding_quality(eval_scenes, data.categories, weights, emb);
        for (std::size_t c = 0; c < gq.categories.size(); ++c) {
            MetricRow row{split, cfg.model, "grounding_quality", "cat:" + gq.categories[c], 0.0,
                          0, true};
            if (gq.score[c])
                row.value = *gq.score[c];
            else
                row.defined = false;
            rows.push_back(row);
        }
    }

    if (cfg.model == "updown" && !prob_vectors.empty()) {
        OrdinalityStats st = ordinality_gap(prob_vectors);
        for (std::size_t g = 0; g < st.cdf_small.size(); ++g)
            rows.push_back({split, cfg.model, "ordinality_cdf_lt5", "gap<=" + std::to_string(g),
                            st.cdf_small[g], st.n_small, true});
        for (std::size_t g = 0; g < st.cdf_large.size(); ++g)
            rows.push_back({split, cfg.model, "ordinality_cdf_ge5", "gap<=" + std::to_string(g),
                            st.cdf_large[g], st.n_large, true});
    }

    write_metrics_csv(rows, out.metrics_csv);
    out.rows = std::move(rows);
    return out;
}

FilterOutcome cmd_filter(const std::string& questions_file, const std::string& annotations_file,
                         const std::string& out_dir) {
    fs::create_directories(out_dir);
    FilterOutcome out;
    std::vector<std::string> warnings;
    std::vector<RawQA> raw = load_vqa_annotations(questions_file, annotations_file, &warnings);

    std::vector<long long> kept_ids;
    for (const RawQA& r : raw) {
        FilterReason reason = filter_howmany(r.question, r.consensus_answer);
        ++out.histogram[filter_reason_name(reason)];
        ++out.total;
        if (reason == FilterReason::KEEP) {
            kept_ids.push_back(r.question_id);
            ++out.kept;
        }
    }
    std::sort(kept_ids.begin(), kept_ids.end());
    out.keep_manifest = out_dir + "/keep_manifest.txt";
    write_manifest(kept_ids, out.keep_manifest);

    out.histogram_csv = out_dir + "/filter_histogram.csv";
    std::ofstream os(out.histogram_csv);
    os << "reason,count\n";
    for (const auto& [reason, count] : out.histogram) os << reason << ',' << count << "\n";
    write_file_manifest(out_dir, {"keep_manifest.txt", "filter_histogram.csv"});
    return out;
}

void write_vqa_files(const std::vector<QARecord>& qa, const std::string& questions_path,
                     const std::string& annotations_path) {
    json qj, aj;
    qj["questions"] = json::array();
    aj["annotations"] = json::array();
    for (const QARecord& q : qa) {
        long long image_id = std::stoll(q.image_id);
        qj["questions"].push_back(
            {{"question_id", q.question_id}, {"image_id", image_id}, {"question", q.question}});
        json answers = json::array();
        for (const auto& a : q.human_answers) answers.push_back({{"answer", a}});
        aj["annotations"].push_back({{"question_id", q.question_id},
                                     {"image_id", image_id},
                                     {"multiple_choice_answer", std::to_string(q.gt_count)},
                                     {"answers", answers}});
    }
    std::ofstream qs(questions_path), as(annotations_path);
    if (!qs || !as) throw std::runtime_error("cannot write VQA files");
    qs << qj.dump(2) << "\n";
    as << aj.dump(2) << "\n";
}

void write_region_captions(const std::vector<SceneRecord>& scenes, const std::string& path) {
    json j = json::array();
    for (const SceneRecord& s : scenes) {
        if (s.captions.empty()) continue;
        json img;
        img["image_id"] = s.image_id;
        img["regions"] = json::array();
        for (const CaptionRecord& c : s.captions) {
            std::string text;
            for (const auto& t : c.tokens) {
                if (!text.empty()) text += ' ';
                text += t;
            }
            img["regions"].push_back({{"caption", text},
                                      {"x", c.region.x1},
                                      {"y", c.region.y1},
                                      {"width", c.region.width()},
                                      {"height", c.region.height()}});
        }
        j.push_back(std::move(img));
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write captions " + path);
    os << j.dump(2) << "\n";
}

SynthOutcome cmd_synth(RunConfig cfg) {
    apply_profile(cfg);
    auto errors = validate_config(cfg);
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw std::runtime_error(msg);
    }
    detail::require(cfg.data == "synth", "cmd_synth: data must be synth");
    fs::create_directories(cfg.out_dir);

    std::size_t n_train = static_cast<std::size_t>(cfg.synth_train_scenes);
    std::size_t n_dev = static_cast<std::size_t>(cfg.synth_dev_scenes);
    SynthDataset all = generate_synthetic_dataset(cfg.synth, n_train + n_dev);

    SynthOutcome out;
    out.features_file = cfg.out_dir + "/features.bin";
    out.labels_file = cfg.out_dir + "/labels.json";
    out.train_questions = cfg.out_dir + "/questions_train.json";
    out.train_annotations = cfg.out_dir + "/annotations_train.json";
    out.dev_questions = cfg.out_dir + "/questions_dev.json";
    out.dev_annotations = cfg.out_dir + "/annotations_dev.json";
    out.captions_file = cfg.out_dir + "/captions.json";
    out.manifest_path = cfg.out_dir + "/manifest.txt";

    write_features(all.scenes, out.features_file);
    write_labels(all.scenes, all.categories, out.labels_file);
    std::vector<QARecord> train_qa(all.qa.begin(), all.qa.begin() + static_cast<long>(n_train));
    std::vector<QARecord> dev_qa(all.qa.begin() + static_cast<long>(n_train), all.qa.end());
    write_vqa_files(train_qa, out.train_questions, out.train_annotations);
    write_vqa_files(dev_qa, out.dev_questions, out.dev_annotations);
    write_region_captions(all.scenes, out.captions_file);
    write_file_manifest(cfg.out_dir,
                        {"features.bin", "labels.json", "questions_train.json",
                         "annotations_train.json", "questions_dev.json", "annotations_dev.json",
                         "captions.json"});
    return out;
}

SweepOutcome cmd_sweep(RunConfig cfg, const std::vector<double>& entropy_grid,
                       const std::vector<double>& interaction_grid) {
    detail::require(!entropy_grid.empty() && !interaction_grid.empty(),
                    "cmd_sweep: empty penalty grid");
    fs::create_directories(cfg.out_dir);
    SweepOutcome out;
    out.csv_path = cfg.out_dir + "/sweep.csv";
    std::ofstream os(out.csv_path);
    os << "entropy_weight,interaction_weight,dev_accuracy\n";
    for (double eh : entropy_grid) {
        for (double ei : interaction_grid) {
            RunConfig cell = cfg;
            cell.entropy_weight = eh;
            cell.interaction_weight = ei;
            cell.out_dir = cfg.out_dir + "/cell_" + std::to_string(eh) + "_" + std::to_string(ei);
            TrainOutcome t = cmd_train(cell);
            out.cells.push_back({eh, ei, t.best_dev_accuracy});
            os << eh << ',' << ei << ',' << t.best_dev_accuracy << "\n";
            os.flush();
        }
    }
    return out;
}

}  // namespace cvqa
