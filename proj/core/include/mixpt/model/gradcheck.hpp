#pragma once

#include <cstdint>
#include <vector>

#include "mixpt/model/config.hpp"
#include "mixpt/nn/gradcheck.hpp"

namespace mixpt::model {

// 2+2 layers at d_model 8 over 8x8 images.
ModelConfig gradcheck_config(std::size_t vocab_size = 24);

// Central-difference check of every parameter of a randomly initialized
// 64-bit model on a random padded batch; one result per parameter tensor.
std::vector<nn::GradCheckResult> model_gradcheck(std::uint64_t seed, double h = 1e-5);

}  // namespace mixpt::model
