#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mixpt/mixture/batch.hpp"
#include "mixpt/mixture/schedule.hpp"
#include "mixpt/model/checkpoint.hpp"
#include "mixpt/model/transformer.hpp"
#include "mixpt/model/vocab.hpp"
#include "mixpt/nn/adam.hpp"
#include "mixpt/rng.hpp"
#include "mixpt/tasks/task.hpp"

namespace mixpt::model {

struct TrainConfig {
    nn::AdamConfig adam;
    mixture::ScheduleConfig schedule;
    mixture::BatchLimits limits;
    std::uint64_t init_seed = 0;
};

struct StepRecord {
    std::size_t step = 0;
    std::string task;
    double loss = 0;
};

struct TrainHooks {
    std::function<void(const StepRecord&)> on_step;
    // Called after every `checkpoint_every` steps and after the last step.
    std::size_t checkpoint_every = 0;
    std::function<void(std::size_t step, const Checkpoint&)> on_checkpoint;
    std::size_t eval_every = 0;
    std::function<void(std::size_t step, Transformer<float>&)> on_eval;
};

// A named training component: its examples, drawn by the mixture schedule.
struct Component {
    std::string name;
    double weight = 1.0;
    std::vector<tasks::TaskExample> examples;
};

// Runs a fixed mixture schedule over the given components. Single-threaded;
// the state after step k is a pure function of the inputs, so a run resumed
// from a step-k checkpoint matches an uninterrupted one bit for bit.
class Trainer {
public:
    Trainer(ModelConfig model_cfg, TrainConfig cfg, Vocab vocab, std::vector<Component> components,
            mixture::ImageLookup images, std::string corpus_fingerprint = {});

    // Loads parameters, optimizer state and step. Fingerprints must match.
    void restore(const Checkpoint& ckpt);
    Checkpoint checkpoint() const;

    // Trains until `until_step` (clamped to the schedule length). A
    // non-finite loss raises NumericError naming the step and task kind.
    std::vector<StepRecord> run(std::size_t until_step, const TrainHooks& hooks = {});
    std::vector<StepRecord> run_all(const TrainHooks& hooks = {}) { return run(schedule_.size(), hooks); }

    std::size_t step() const { return step_; }
    const mixture::MixtureSchedule& schedule() const { return schedule_; }
    Transformer<float>& model() { return *model_; }
    const Vocab& vocab() const { return vocab_; }
    const std::vector<Component>& components() const { return components_; }
    mixture::Batch batch_for(const mixture::ScheduleEntry& entry) const;

private:
    ModelConfig model_cfg_;
    TrainConfig cfg_;
    Vocab vocab_;
    std::vector<Component> components_;
    mixture::ImageLookup images_;
    std::string corpus_fp_;
    mixture::MixtureSchedule schedule_;
    std::unique_ptr<Transformer<float>> model_;
    std::unique_ptr<nn::Adam<float>> adam_;
    Rng rng_;
    std::size_t step_ = 0;
};

}  // namespace mixpt::model
