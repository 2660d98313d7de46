#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mixpt/corpus/synthetic.hpp"
#include "mixpt/corpus/types.hpp"
#include "mixpt/mixture/batch.hpp"
#include "mixpt/model/config.hpp"
#include "mixpt/model/vocab.hpp"
#include "mixpt/tasks/task.hpp"

namespace mixpt::fixtures {

// Synthetic corpus of 32x32 images (4x4 grid of 8px cells).
corpus::Corpus small_corpus(std::size_t n_images = 40, std::uint64_t seed = 1, double hidden_rate = 0.0);

mixture::ImageLookup image_lookup(const corpus::Corpus& corpus);

// 2+2 layers at d_model 8 over 8x8 images; for 64-bit gradient checks.
model::ModelConfig tiny_config(std::size_t vocab_size);

mixture::Batch make_batch(const std::vector<tasks::TaskExample>& examples, const model::Vocab& vocab,
                          const corpus::Corpus& corpus, mixture::BatchLimits limits = {});

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace mixpt::fixtures
