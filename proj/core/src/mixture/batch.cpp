#include "mixpt/mixture/batch.hpp"

#include <algorithm>

#include "mixpt/error.hpp"

namespace mixpt::mixture {

Batch make_batch(const std::vector<const tasks::TaskExample*>& examples, const model::Vocab& vocab,
                 const BatchLimits& limits, const ImageLookup& images) {
    if (examples.empty()) throw InputError("cannot build an empty batch");
    if (limits.max_prompt == 0 || limits.max_target < 2) throw ConfigError("batch limits too small");

    Batch batch;
    batch.size = examples.size();
    std::vector<std::vector<model::TokenId>> prompts, targets;
    for (const auto* e : examples) {
        auto p = vocab.encode(e->prompt);
        if (p.size() > limits.max_prompt) {
            p.resize(limits.max_prompt);
            ++batch.truncations;
        }
        if (p.empty()) p.push_back(model::Vocab::kUnk);
        auto t = vocab.encode(e->target);
        if (t.size() + 1 > limits.max_target) {
            t.resize(limits.max_target - 1);
            ++batch.truncations;
        }
        t.push_back(model::Vocab::kEos);
        batch.prompt_len = std::max(batch.prompt_len, p.size());
        batch.target_len = std::max(batch.target_len, t.size());
        prompts.push_back(std::move(p));
        targets.push_back(std::move(t));
        batch.kinds.push_back(e->kind);
    }

    batch.prompt_ids.assign(batch.size * batch.prompt_len, model::Vocab::kPad);
    batch.prompt_mask.assign(batch.size * batch.prompt_len, 0);
    batch.target_ids.assign(batch.size * batch.target_len, model::Vocab::kPad);
    batch.loss_mask.assign(batch.size * batch.target_len, 0);
    for (std::size_t b = 0; b < batch.size; ++b) {
        for (std::size_t i = 0; i < prompts[b].size(); ++i) {
            batch.prompt_ids[b * batch.prompt_len + i] = prompts[b][i];
            batch.prompt_mask[b * batch.prompt_len + i] = 1;
        }
        for (std::size_t i = 0; i < targets[b].size(); ++i) {
            batch.target_ids[b * batch.target_len + i] = targets[b][i];
            batch.loss_mask[b * batch.target_len + i] = 1;
        }
    }

    for (std::size_t b = 0; b < batch.size; ++b) {
        const corpus::ImageRecord& img = images(examples[b]->image_id);
        if (b == 0) {
            batch.image_height = img.height;
            batch.image_width = img.width;
            batch.images.reserve(batch.size * img.pixels.size());
        } else if (img.height != batch.image_height || img.width != batch.image_width) {
            throw ShapeError("images in a batch must share a shape");
        }
        batch.images.insert(batch.images.end(), img.pixels.begin(), img.pixels.end());
    }
    return batch;
}

}  // namespace mixpt::mixture
