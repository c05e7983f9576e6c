#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "countvqa/trainer.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string profile;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool no_grounding = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--profile", flags.profile, "dimension profile: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", flags.seed, "random seed")->each([&flags](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_flag("--no-grounding", flags.no_grounding, "disable caption grounding");
}

// CLI flags override file values.
cvqa::RunConfig resolve_config(const CommonFlags& flags) {
    cvqa::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = cvqa::load_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.profile.empty()) cfg.profile = flags.profile;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.no_grounding) cfg.grounding = false;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interpretable counting for visual question answering"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    std::string train_model;
    auto* train_cmd = app.add_subcommand("train", "train a counting model");
    add_common(train_cmd, train_flags);
    train_cmd->add_option("--model", train_model,
                          "model kind: softcount|updown|irlc|guess1|lstm");

    CommonFlags eval_flags;
    std::string eval_checkpoint, eval_split = "dev";
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd, eval_flags);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--split", eval_split, "train|dev|test");

    std::string filter_questions, filter_annotations, filter_out = "filter_out";
    auto* filter_cmd = app.add_subcommand("filter", "apply the counting-question filter");
    filter_cmd->add_option("--questions", filter_questions, "VQA questions json")->required();
    filter_cmd->add_option("--annotations", filter_annotations, "VQA annotations json")
        ->required();
    filter_cmd->add_option("--out", filter_out, "output directory");

    CommonFlags synth_flags;
    auto* synth_cmd = app.add_subcommand("synth", "materialize a synthetic dataset");
    add_common(synth_cmd, synth_flags);

    CommonFlags sweep_flags;
    std::vector<double> sweep_entropy{0.005}, sweep_interaction{0.005};
    auto* sweep_cmd = app.add_subcommand("sweep", "penalty-weight grid for irlc");
    add_common(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--entropy-grid", sweep_entropy, "entropy penalty weights");
    sweep_cmd->add_option("--interaction-grid", sweep_interaction,
                          "interaction penalty weights");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            cvqa::RunConfig cfg = resolve_config(train_flags);
            if (!train_model.empty()) cfg.model = train_model;
            cvqa::TrainOutcome out = cvqa::cmd_train(cfg);
            std::printf("best epoch %d: dev accuracy %.4f, dev rmse %.4f\n", out.best_epoch,
                        out.best_dev_accuracy, out.best_dev_rmse);
            std::printf("checkpoint: %s\n", out.checkpoint_path.c_str());
        } else if (eval_cmd->parsed()) {
            cvqa::RunConfig cfg = resolve_config(eval_flags);
            std::string out_dir = cfg.out_dir;
            cvqa::EvalOutcome out = cvqa::cmd_eval(cfg, eval_checkpoint, eval_split, out_dir);
            std::printf("%s: accuracy %.4f, rmse %.4f over %zu questions\n", eval_split.c_str(),
                        out.metrics.accuracy, out.metrics.rmse_value, out.metrics.n);
            std::printf("metrics: %s\ndump: %s\n", out.metrics_csv.c_str(),
                        out.dump_jsonl.c_str());
        } else if (filter_cmd->parsed()) {
            cvqa::FilterOutcome out =
                cvqa::cmd_filter(filter_questions, filter_annotations, filter_out);
            std::printf("kept %zu of %zu questions\n", out.kept, out.total);
            for (const auto& [reason, count] : out.histogram)
                std::printf("  %-14s %zu\n", reason.c_str(), count);
            std::printf("manifest: %s\n", out.keep_manifest.c_str());
        } else if (synth_cmd->parsed()) {
            cvqa::RunConfig cfg = resolve_config(synth_flags);
            cvqa::SynthOutcome out = cvqa::cmd_synth(cfg);
            std::printf("features: %s\n", out.features_file.c_str());
            std::printf("qa: %s / %s\n", out.train_questions.c_str(),
                        out.dev_questions.c_str());
        } else if (sweep_cmd->parsed()) {
            cvqa::RunConfig cfg = resolve_config(sweep_flags);
            cfg.model = "irlc";
            cvqa::SweepOutcome out = cvqa::cmd_sweep(cfg, sweep_entropy, sweep_interaction);
            for (const auto& cell : out.cells)
                std::printf("H=%g I=%g -> dev accuracy %.4f\n", cell.entropy_weight,
                            cell.interaction_weight, cell.dev_accuracy);
            std::printf("grid: %s\n", out.csv_path.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
