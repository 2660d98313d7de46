#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mixpt/corpus/types.hpp"
#include "mixpt/model/vocab.hpp"
#include "mixpt/tasks/task.hpp"

namespace mixpt::mixture {

struct BatchLimits {
    std::size_t max_prompt = 32;
    std::size_t max_target = 16;
};

// Right-padded token batch plus images, row-major [batch][position].
struct Batch {
    std::size_t size = 0;
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::vector<float> images;  // size x H x W x 3

    std::size_t prompt_len = 0;
    std::vector<model::TokenId> prompt_ids;
    std::vector<std::uint8_t> prompt_mask;

    std::size_t target_len = 0;
    std::vector<model::TokenId> target_ids;
    std::vector<std::uint8_t> loss_mask;

    std::vector<tasks::TaskKind> kinds;
    std::size_t truncations = 0;
};

using ImageLookup = std::function<const corpus::ImageRecord&(const std::string& image_id)>;

// Prompts are truncated to max_prompt; targets to max_target - 1 words plus
// eos. Sequences pad to the longest in the batch.
Batch make_batch(const std::vector<const tasks::TaskExample*>& examples, const model::Vocab& vocab,
                 const BatchLimits& limits, const ImageLookup& images);

}  // namespace mixpt::mixture
