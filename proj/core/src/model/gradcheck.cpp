#include "mixpt/model/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mixpt/model/transformer.hpp"
#include "mixpt/rng.hpp"

namespace mixpt::model {

ModelConfig gradcheck_config(std::size_t vocab_size) {
    ModelConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_encoder_layers = 2;
    c.n_decoder_layers = 2;
    c.d_ff = 16;
    c.patch = 4;
    c.image_size = 8;
    c.max_prompt = 8;
    c.max_target = 6;
    c.vocab_size = vocab_size;
    c.init_scale = 0.5;
    return c;
}

namespace {

mixture::Batch random_batch(const ModelConfig& cfg, Rng& rng) {
    mixture::Batch b;
    b.size = 2;
    b.image_height = b.image_width = cfg.image_size;
    b.images.resize(b.size * cfg.image_size * cfg.image_size * cfg.channels);
    for (auto& v : b.images) v = static_cast<float>(rng.uniform());
    auto word = [&] { return static_cast<TokenId>(3 + rng.index(cfg.vocab_size - 3)); };

    b.prompt_len = 4;
    for (std::size_t i = 0; i < b.size * b.prompt_len; ++i) {
        const bool pad = i == b.prompt_len * 2 - 1;  // second row ends in padding
        b.prompt_ids.push_back(pad ? Vocab::kPad : word());
        b.prompt_mask.push_back(pad ? 0 : 1);
    }
    b.target_len = 4;
    for (std::size_t r = 0; r < b.size; ++r)
        for (std::size_t t = 0; t < b.target_len; ++t) {
            const bool pad = r == 1 && t == 3;
            b.target_ids.push_back(pad ? Vocab::kPad : (t == 2 && r == 1 ? Vocab::kEos : word()));
            b.loss_mask.push_back(pad ? 0 : 1);
        }
    return b;
}

}  // namespace

std::vector<nn::GradCheckResult> model_gradcheck(std::uint64_t seed, double h) {
    const ModelConfig cfg = gradcheck_config();
    Transformer<double> model(cfg, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    // Biases and layer-norm parameters start at 0/1; randomize them so the
    // check is not evaluated at a special point.
    auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i)
        for (auto& v : params[i].value.data) v += 0.1 * rng.normal();
    const mixture::Batch batch = random_batch(cfg, rng);

    params.zero_grad();
    {
        nn::Graph<double> g;
        g.backward(model.forward(g, batch).loss);
    }
    auto loss_at = [&] {
        nn::Graph<double> g(false);
        return g.value(model.forward(g, batch).loss)[0];
    };

    std::vector<nn::GradCheckResult> out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        nn::GradCheckResult r;
        r.name = p.name;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double orig = p.value[j];
            p.value[j] = orig + h;
            const double up = loss_at();
            p.value[j] = orig - h;
            const double down = loss_at();
            p.value[j] = orig;
            const double numeric = (up - down) / (2 * h);
            r.max_rel_error = std::max(r.max_rel_error, nn::relative_error(p.grad[j], numeric));
            r.max_abs_error = std::max(r.max_abs_error, std::abs(p.grad[j] - numeric));
            ++r.checked;
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace mixpt::model
