#pragma once

#include <cstddef>

#include <nlohmann/json.hpp>

namespace mixpt::model {

struct ModelConfig {
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_encoder_layers = 2;
    std::size_t n_decoder_layers = 2;
    std::size_t d_ff = 256;
    std::size_t patch = 4;
    std::size_t image_size = 32;
    std::size_t channels = 3;
    std::size_t max_prompt = 32;
    std::size_t max_target = 16;
    std::size_t vocab_size = 0;
    double init_scale = 0.05;  // std of embedding tables

    std::size_t vision_tokens() const { return (image_size / patch) * (image_size / patch); }

    // Throws ConfigError.
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);

    bool operator==(const ModelConfig&) const = default;
};

}  // namespace mixpt::model
