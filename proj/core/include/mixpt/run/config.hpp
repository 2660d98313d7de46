#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mixpt/corpus/synthetic.hpp"
#include "mixpt/eval/report.hpp"
#include "mixpt/mixture/batch.hpp"
#include "mixpt/mixture/schedule.hpp"
#include "mixpt/model/config.hpp"
#include "mixpt/nn/adam.hpp"
#include "mixpt/tasks/task.hpp"

namespace mixpt::run {

enum class CorpusSource { synthetic, directory };

// Everything a training run depends on. Parsed from an INI file with the
// sections [run] [corpus] [synth] [mixture] [schedule] [model] [optim] [eval].
struct RunConfig {
    std::uint64_t seed = 0;
    double eval_fraction = 0.2;

    CorpusSource corpus_source = CorpusSource::synthetic;
    std::filesystem::path corpus_path;  // directory source only
    std::size_t n_images = 600;
    std::size_t grid = 4;
    std::size_t cell_px = 8;
    double hidden_rate = 0.0;

    tasks::SynthConfig synth;
    std::size_t train_examples_per_kind = 2000;

    // Component names are task kinds.
    std::vector<mixture::Component> mixture;
    std::size_t total_steps = 2000;
    std::size_t batch_size = 16;

    model::ModelConfig model;  // image_size and vocab_size are derived
    nn::AdamConfig optim;

    std::vector<tasks::TaskKind> eval_kinds;
    // Negatives for the held-out set, independent of the training policy so
    // easy/hard variants share one evaluation set.
    tasks::NegativePolicy eval_policy = tasks::NegativePolicy::Easy;
    std::size_t eval_examples_per_kind = 200;
    eval::Metric metric = eval::Metric::automatic;
    std::size_t eval_batch_size = 32;
    std::size_t checkpoint_every = 0;

    RunConfig();

    // Throws ConfigError on an unknown key, a malformed value or an invalid
    // combination.
    static RunConfig parse(const std::string& ini_text);
    static RunConfig load(const std::filesystem::path& path);
    std::string to_ini() const;
    void validate() const;

    std::vector<tasks::TaskKind> train_kinds() const;
    std::size_t image_size() const { return grid * cell_px; }
    mixture::BatchLimits limits() const { return {model.max_prompt, model.max_target}; }
    corpus::SynthCorpusParams corpus_params() const;
    tasks::SynthConfig eval_synth() const {
        auto s = synth;
        s.policy = eval_policy;
        return s;
    }
};

// Resolves a relative path against $MIXPRETRAIN_DATA when set.
std::filesystem::path resolve_data_path(const std::filesystem::path& p);

}  // namespace mixpt::run
