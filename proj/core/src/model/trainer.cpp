#include "mixpt/model/trainer.hpp"

#include <cmath>
#include <sstream>

#include "mixpt/error.hpp"

namespace mixpt::model {

Trainer::Trainer(ModelConfig model_cfg, TrainConfig cfg, Vocab vocab, std::vector<Component> components,
                 mixture::ImageLookup images, std::string corpus_fingerprint)
    : model_cfg_(std::move(model_cfg)),
      cfg_(std::move(cfg)),
      vocab_(std::move(vocab)),
      components_(std::move(components)),
      images_(std::move(images)),
      corpus_fp_(std::move(corpus_fingerprint)),
      rng_(cfg_.schedule.seed) {
    if (components_.empty()) throw ConfigError("no training components");
    model_cfg_.vocab_size = vocab_.size();
    model_cfg_.max_prompt = cfg_.limits.max_prompt;
    model_cfg_.max_target = cfg_.limits.max_target;

    std::vector<mixture::Component> mix;
    std::vector<std::size_t> sizes;
    for (const auto& c : components_) {
        mix.push_back({c.name, c.weight});
        sizes.push_back(c.examples.size());
    }
    schedule_ = mixture::build_schedule(mixture::MixtureSpec(mix), cfg_.schedule, sizes);
    model_ = std::make_unique<Transformer<float>>(model_cfg_, cfg_.init_seed);
    adam_ = std::make_unique<nn::Adam<float>>(cfg_.adam, model_->params());
}

mixture::Batch Trainer::batch_for(const mixture::ScheduleEntry& entry) const {
    const auto& examples = components_.at(entry.component).examples;
    std::vector<const tasks::TaskExample*> ptrs;
    ptrs.reserve(entry.example_ids.size());
    for (auto id : entry.example_ids) ptrs.push_back(&examples.at(id));
    return mixture::make_batch(ptrs, vocab_, cfg_.limits, images_);
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.config = model_cfg_;
    c.vocab = vocab_.tokens();
    c.vocab_fingerprint = vocab_.fingerprint();
    c.corpus_fingerprint = corpus_fp_;
    c.step = step_;
    c.rng_state = rng_.state();
    c.adam = adam_->config();
    c.adam_steps = adam_->steps();
    c.params = export_params(model_->params());
    const auto& params = model_->params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        c.first_moments.push_back({params[i].name, params[i].value.shape, adam_->first_moments()[i].data});
        c.second_moments.push_back({params[i].name, params[i].value.shape, adam_->second_moments()[i].data});
    }
    return c;
}

void Trainer::restore(const Checkpoint& c) {
    check_fingerprints(c, vocab_.fingerprint(), corpus_fp_);
    if (!(c.config == model_cfg_)) throw ConfigError("checkpoint model config differs from the run config");
    if (c.step > schedule_.size()) throw ConfigError("checkpoint step is past the end of the schedule");
    import_params(model_->params(), c.params);
    auto& m = adam_->first_moments();
    auto& v = adam_->second_moments();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (c.first_moments.at(i).shape != m[i].shape || c.second_moments.at(i).shape != v[i].shape)
            throw ShapeError("optimizer state shape mismatch for " + c.params[i].name);
        m[i].data = c.first_moments[i].data;
        v[i].data = c.second_moments[i].data;
    }
    adam_->set_steps(c.adam_steps);
    rng_.restore(c.rng_state);
    step_ = c.step;
}

std::vector<StepRecord> Trainer::run(std::size_t until_step, const TrainHooks& hooks) {
    until_step = std::min(until_step, schedule_.size());
    std::vector<StepRecord> history;
    auto& params = model_->params();
    while (step_ < until_step) {
        const auto& entry = schedule_[step_];
        const std::string& task = components_[entry.component].name;
        mixture::Batch batch = batch_for(entry);
        params.zero_grad();
        double loss = 0;
        try {
            nn::Graph<float> g;
            auto out = model_->forward(g, batch);
            loss = g.value(out.loss)[0];
            g.backward(out.loss);
            adam_->step(params);
        } catch (const NumericError& e) {
            throw NumericError("training aborted at step " + std::to_string(step_ + 1) + " (task " + task +
                               "): " + e.what());
        }
        ++step_;
        StepRecord rec{step_, task, loss};
        history.push_back(rec);
        if (hooks.on_step) hooks.on_step(rec);
        if (hooks.on_eval && hooks.eval_every && step_ % hooks.eval_every == 0) hooks.on_eval(step_, *model_);
        const bool last = step_ == schedule_.size();
        if (hooks.on_checkpoint && (last || (hooks.checkpoint_every && step_ % hooks.checkpoint_every == 0)))
            hooks.on_checkpoint(step_, checkpoint());
    }
    return history;
}

}  // namespace mixpt::model
