#include "mixpt/model/config.hpp"

#include "mixpt/error.hpp"

namespace mixpt::model {

void ModelConfig::validate() const {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
        throw ConfigError("d_model must be a positive multiple of n_heads");
    if (patch == 0 || image_size == 0 || image_size % patch != 0)
        throw ConfigError("image_size must be a positive multiple of patch");
    if (d_ff == 0 || channels == 0) throw ConfigError("d_ff and channels must be positive");
    if (n_encoder_layers == 0 || n_decoder_layers == 0) throw ConfigError("need at least one layer per stack");
    if (max_prompt == 0 || max_target < 2) throw ConfigError("max_prompt must be >= 1 and max_target >= 2");
    if (vocab_size < 20) throw ConfigError("vocab_size too small (specials alone take 19 ids)");
    if (!(init_scale > 0)) throw ConfigError("init_scale must be positive");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"d_model", d_model},       {"n_heads", n_heads},
            {"n_encoder_layers", n_encoder_layers}, {"n_decoder_layers", n_decoder_layers},
            {"d_ff", d_ff},             {"patch", patch},
            {"image_size", image_size}, {"channels", channels},
            {"max_prompt", max_prompt}, {"max_target", max_target},
            {"vocab_size", vocab_size}, {"init_scale", init_scale}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.d_model = j.at("d_model").get<std::size_t>();
        c.n_heads = j.at("n_heads").get<std::size_t>();
        c.n_encoder_layers = j.at("n_encoder_layers").get<std::size_t>();
        c.n_decoder_layers = j.at("n_decoder_layers").get<std::size_t>();
        c.d_ff = j.at("d_ff").get<std::size_t>();
        c.patch = j.at("patch").get<std::size_t>();
        c.image_size = j.at("image_size").get<std::size_t>();
        c.channels = j.at("channels").get<std::size_t>();
        c.max_prompt = j.at("max_prompt").get<std::size_t>();
        c.max_target = j.at("max_target").get<std::size_t>();
        c.vocab_size = j.at("vocab_size").get<std::size_t>();
        c.init_scale = j.at("init_scale").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
    return c;
}

}  // namespace mixpt::model
