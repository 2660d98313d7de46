#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mixpt/corpus/types.hpp"
#include "mixpt/eval/report.hpp"
#include "mixpt/model/trainer.hpp"
#include "mixpt/run/config.hpp"
#include "mixpt/tasks/dataset.hpp"

namespace mixpt::run {

// Run directory layout.
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.ini"; }
    std::filesystem::path corpus() const { return root / "corpus"; }
    std::filesystem::path train_tasks() const { return root / "tasks" / "train"; }
    std::filesystem::path eval_tasks() const { return root / "tasks" / "eval"; }
    std::filesystem::path vocab() const { return root / "vocab.json"; }
    std::filesystem::path metrics() const { return root / "metrics.jsonl"; }
    std::filesystem::path schedule() const { return root / "schedule.csv"; }
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path last_checkpoint() const { return checkpoints() / "last.ckpt"; }
    std::filesystem::path eval_report() const { return root / "eval.json"; }
};

// Corpus, splits and task data derived deterministically from a config.
struct PreparedData {
    corpus::Corpus corpus;
    std::vector<std::string> train_ids;
    std::vector<std::string> eval_ids;
    std::vector<tasks::TaskExample> train_examples;
    std::vector<tasks::TaskExample> eval_examples;
    tasks::SynthStats train_stats;
    tasks::SynthStats eval_stats;
    model::Vocab vocab;
};

// Seed-keyed split of image ids; both sides non-empty.
std::pair<std::vector<std::string>, std::vector<std::string>> split_images(const std::vector<std::string>& ids,
                                                                           double eval_fraction, std::uint64_t seed);

PreparedData prepare_data(const RunConfig& cfg);

struct RunOptions {
    bool resume = false;
    std::ostream* log = nullptr;
    std::size_t log_every = 100;
};

struct RunResult {
    RunPaths paths;
    std::vector<model::StepRecord> history;  // steps executed by this invocation
    eval::EvalReport report;
};

// Full train run: writes the config copy (bytes as given), corpus, task
// files, vocabulary, schedule, metrics, checkpoints and the final report.
// With resume, continues from checkpoints/last.ckpt.
RunResult train_run(const std::string& config_text, const std::filesystem::path& out_dir, const RunOptions& opts = {});

}  // namespace mixpt::run
