#include "mixpt/model/transformer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "mixpt/rng.hpp"

namespace mixpt::model {

using nn::Graph;
using nn::Parameter;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

template <typename T>
Tensor<T> normal(Rng& rng, Shape shape, double std) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * std);
    return t;
}

template <typename T>
constexpr T kNegInf = -std::numeric_limits<T>::infinity();

std::vector<std::int32_t> iota_ids(std::size_t n) {
    std::vector<std::int32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

}  // namespace

template <typename T>
Transformer<T>::Transformer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.d_model;
    const double emb = cfg_.init_scale;
    auto weight = [&](const std::string& name, std::size_t fan_in, std::size_t fan_out) {
        return &params_.add(name, normal<T>(rng, {fan_in, fan_out}, 1.0 / std::sqrt(static_cast<double>(fan_in))));
    };
    auto zeros = [&](const std::string& name, std::size_t n) { return &params_.add(name, Tensor<T>(Shape{n})); };
    auto ones = [&](const std::string& name, std::size_t n) { return &params_.add(name, Tensor<T>(Shape{n}, T(1))); };

    const std::size_t patch_in = cfg_.patch * cfg_.patch * cfg_.channels;
    patch_w_ = weight("patch.w", patch_in, d);
    patch_b_ = zeros("patch.b", d);
    tok_emb_ = &params_.add("embed.tokens", normal<T>(rng, {cfg_.vocab_size, d}, emb));
    pos_vision_ = &params_.add("embed.pos_vision", normal<T>(rng, {cfg_.vision_tokens(), d}, emb));
    pos_prompt_ = &params_.add("embed.pos_prompt", normal<T>(rng, {cfg_.max_prompt, d}, emb));
    pos_target_ = &params_.add("embed.pos_target", normal<T>(rng, {cfg_.max_target, d}, emb));
    type_emb_ = &params_.add("embed.type", normal<T>(rng, {2, d}, emb));

    auto make_layer = [&](const std::string& p, bool cross) {
        Layer l{};
        l.ln1_g = ones(p + ".ln1.g", d);
        l.ln1_b = zeros(p + ".ln1.b", d);
        l.wq = weight(p + ".attn.wq", d, d);
        l.bq = zeros(p + ".attn.bq", d);
        l.wk = weight(p + ".attn.wk", d, d);
        // No key bias: it shifts every score of a query row equally, which
        // softmax ignores, so its gradient is identically zero.
        l.wv = weight(p + ".attn.wv", d, d);
        l.bv = zeros(p + ".attn.bv", d);
        l.wo = weight(p + ".attn.wo", d, d);
        l.bo = zeros(p + ".attn.bo", d);
        if (cross) {
            l.lnx_g = ones(p + ".lnx.g", d);
            l.lnx_b = zeros(p + ".lnx.b", d);
            l.xq = weight(p + ".cross.wq", d, d);
            l.xbq = zeros(p + ".cross.bq", d);
            l.xk = weight(p + ".cross.wk", d, d);
            l.xv = weight(p + ".cross.wv", d, d);
            l.xbv = zeros(p + ".cross.bv", d);
            l.xo = weight(p + ".cross.wo", d, d);
            l.xbo = zeros(p + ".cross.bo", d);
        }
        l.ln2_g = ones(p + ".ln2.g", d);
        l.ln2_b = zeros(p + ".ln2.b", d);
        l.w1 = weight(p + ".ff.w1", d, cfg_.d_ff);
        l.b1 = zeros(p + ".ff.b1", cfg_.d_ff);
        l.w2 = weight(p + ".ff.w2", cfg_.d_ff, d);
        l.b2 = zeros(p + ".ff.b2", d);
        return l;
    };
    for (std::size_t i = 0; i < cfg_.n_encoder_layers; ++i) enc_.push_back(make_layer("enc." + std::to_string(i), false));
    enc_ln_g_ = ones("enc.ln.g", d);
    enc_ln_b_ = zeros("enc.ln.b", d);
    for (std::size_t i = 0; i < cfg_.n_decoder_layers; ++i) dec_.push_back(make_layer("dec." + std::to_string(i), true));
    dec_ln_g_ = ones("dec.ln.g", d);
    dec_ln_b_ = zeros("dec.ln.b", d);
}

template <typename T>
Var Transformer<T>::linear(Graph<T>& g, Var x, Parameter<T>* w, Parameter<T>* b) {
    Var y = g.matmul(x, g.param(*w));
    return b ? g.add(y, g.param(*b)) : y;
}

template <typename T>
Var Transformer<T>::attend(Graph<T>& g, Var x_q, Var x_kv, Parameter<T>* wq, Parameter<T>* bq, Parameter<T>* wk,
                           Parameter<T>* bk, Parameter<T>* wv, Parameter<T>* bv, Parameter<T>* wo, Parameter<T>* bo,
                           Var mask) {
    const std::size_t h = cfg_.n_heads;
    Var q = g.split_heads(linear(g, x_q, wq, bq), h);
    Var k = g.split_heads(linear(g, x_kv, wk, bk), h);
    Var v = g.split_heads(linear(g, x_kv, wv, bv), h);
    return linear(g, g.merge_heads(g.attention(q, k, v, mask)), wo, bo);
}

template <typename T>
Tensor<T> Transformer<T>::memory_key_mask(const mixture::Batch& batch) const {
    const std::size_t nv = cfg_.vision_tokens();
    const std::size_t S = nv + batch.prompt_len;
    Tensor<T> m(Shape{batch.size, S});
    for (std::size_t b = 0; b < batch.size; ++b)
        for (std::size_t j = 0; j < batch.prompt_len; ++j)
            if (!batch.prompt_mask[b * batch.prompt_len + j]) m[b * S + nv + j] = kNegInf<T>;
    return m;
}

template <typename T>
Var Transformer<T>::encode(Graph<T>& g, const mixture::Batch& batch) {
    const std::size_t B = batch.size, P = batch.prompt_len;
    if (B == 0) throw ShapeError("empty batch");
    if (batch.image_height != cfg_.image_size || batch.image_width != cfg_.image_size)
        throw ShapeError("batch images are " + std::to_string(batch.image_height) + "x" +
                         std::to_string(batch.image_width) + ", model expects " + std::to_string(cfg_.image_size));
    if (P == 0 || P > cfg_.max_prompt) throw ShapeError("prompt length " + std::to_string(P) + " outside [1, max_prompt]");
    if (batch.prompt_ids.size() != B * P || batch.prompt_mask.size() != B * P)
        throw ShapeError("prompt ids do not match batch shape");

    Tensor<T> img(Shape{B, cfg_.image_size, cfg_.image_size, cfg_.channels});
    if (batch.images.size() != img.size()) throw ShapeError("image buffer does not match batch shape");
    std::copy(batch.images.begin(), batch.images.end(), img.data.begin());

    const std::size_t nv = cfg_.vision_tokens();
    Var type = g.param(*type_emb_);
    Var vision = g.conv_patchify(g.constant(std::move(img)), g.param(*patch_w_), g.param(*patch_b_), cfg_.patch);
    vision = g.add(vision, g.param(*pos_vision_));
    vision = g.add(vision, g.embedding(type, {0}, Shape{}));

    Var text = g.embedding(g.param(*tok_emb_), batch.prompt_ids, {B, P});
    text = g.add(text, g.embedding(g.param(*pos_prompt_), iota_ids(P), {P}));
    text = g.add(text, g.embedding(type, {1}, Shape{}));

    Var x = g.concat_seq(vision, text);
    const std::size_t S = nv + P;
    Tensor<T> key_mask = memory_key_mask(batch);
    Tensor<T> mask(Shape{B, S, S});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < S; ++i) std::copy_n(key_mask.ptr() + b * S, S, mask.ptr() + (b * S + i) * S);
    Var m = g.constant(std::move(mask));

    for (auto& l : enc_) {
        Var h = g.layer_norm(x, g.param(*l.ln1_g), g.param(*l.ln1_b));
        x = g.add(x, attend(g, h, h, l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo, m));
        h = g.layer_norm(x, g.param(*l.ln2_g), g.param(*l.ln2_b));
        x = g.add(x, linear(g, g.gelu(linear(g, h, l.w1, l.b1)), l.w2, l.b2));
    }
    return g.layer_norm(x, g.param(*enc_ln_g_), g.param(*enc_ln_b_));
}

template <typename T>
Var Transformer<T>::decode(Graph<T>& g, Var memory, const Tensor<T>& key_mask, const std::vector<TokenId>& dec_in,
                           std::size_t B, std::size_t L) {
    if (L == 0 || L > cfg_.max_target) throw ShapeError("target length " + std::to_string(L) + " outside [1, max_target]");
    const std::size_t S = g.shape(memory)[1];

    Var y = g.embedding(g.param(*tok_emb_), dec_in, {B, L});
    y = g.add(y, g.embedding(g.param(*pos_target_), iota_ids(L), {L}));

    Tensor<T> causal(Shape{B, L, L});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = i + 1; j < L; ++j) causal[(b * L + i) * L + j] = kNegInf<T>;
    Tensor<T> cross(Shape{B, L, S});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < L; ++i) std::copy_n(key_mask.ptr() + b * S, S, cross.ptr() + (b * L + i) * S);
    Var cm = g.constant(std::move(causal));
    Var xm = g.constant(std::move(cross));

    for (auto& l : dec_) {
        Var h = g.layer_norm(y, g.param(*l.ln1_g), g.param(*l.ln1_b));
        y = g.add(y, attend(g, h, h, l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo, cm));
        h = g.layer_norm(y, g.param(*l.lnx_g), g.param(*l.lnx_b));
        y = g.add(y, attend(g, h, memory, l.xq, l.xbq, l.xk, l.xbk, l.xv, l.xbv, l.xo, l.xbo, xm));
        h = g.layer_norm(y, g.param(*l.ln2_g), g.param(*l.ln2_b));
        y = g.add(y, linear(g, g.gelu(linear(g, h, l.w1, l.b1)), l.w2, l.b2));
    }
    y = g.layer_norm(y, g.param(*dec_ln_g_), g.param(*dec_ln_b_));
    return g.matmul_nt(y, g.param(*tok_emb_));
}

namespace {

std::vector<TokenId> shift_right(const mixture::Batch& batch) {
    const std::size_t L = batch.target_len;
    std::vector<TokenId> in(batch.size * L, Vocab::kPad);
    for (std::size_t b = 0; b < batch.size; ++b)
        for (std::size_t t = 1; t < L; ++t) in[b * L + t] = batch.target_ids[b * L + t - 1];
    return in;
}

}  // namespace

template <typename T>
typename Transformer<T>::Output Transformer<T>::forward(Graph<T>& g, const mixture::Batch& batch) {
    if (batch.target_ids.size() != batch.size * batch.target_len || batch.loss_mask.size() != batch.target_ids.size())
        throw ShapeError("target ids do not match batch shape");
    Var memory = encode(g, batch);
    Var logits = decode(g, memory, memory_key_mask(batch), shift_right(batch), batch.size, batch.target_len);
    Var loss = g.cross_entropy_masked(logits, batch.target_ids, batch.loss_mask);
    return {logits, loss};
}

template <typename T>
std::vector<double> Transformer<T>::per_example_losses(const mixture::Batch& batch) {
    Graph<T> g(false);
    Var memory = encode(g, batch);
    Var logits = decode(g, memory, memory_key_mask(batch), shift_right(batch), batch.size, batch.target_len);
    const auto& Lg = g.value(logits);
    const std::size_t V = cfg_.vocab_size, L = batch.target_len;
    std::vector<double> out(batch.size, 0.0);
    for (std::size_t b = 0; b < batch.size; ++b) {
        std::size_t n = 0;
        double total = 0;
        for (std::size_t t = 0; t < L; ++t) {
            if (!batch.loss_mask[b * L + t]) continue;
            const T* row = Lg.ptr() + (b * L + t) * V;
            double mx = *std::max_element(row, row + V);
            double z = 0;
            for (std::size_t j = 0; j < V; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
            total += mx + std::log(z) - static_cast<double>(row[batch.target_ids[b * L + t]]);
            ++n;
        }
        out[b] = n ? total / static_cast<double>(n) : 0.0;
    }
    return out;
}

template <typename T>
std::vector<std::vector<TokenId>> Transformer<T>::generate(const mixture::Batch& batch, std::size_t max_len) {
    if (max_len > cfg_.max_target) throw InputError("max_len exceeds the configured max target length");
    const std::size_t B = batch.size, V = cfg_.vocab_size;
    Tensor<T> memory;
    {
        Graph<T> g(false);
        memory = g.value(encode(g, batch));
    }
    const Tensor<T> key_mask = memory_key_mask(batch);

    std::vector<std::vector<TokenId>> out(B);
    std::vector<bool> done(B, false);
    std::vector<TokenId> prefix(B, Vocab::kPad);  // [B, t] row-major, grows by one column per step
    for (std::size_t t = 1; t <= max_len; ++t) {
        Graph<T> g(false);
        Var logits = decode(g, g.constant(memory), key_mask, prefix, B, t);
        const auto& Lg = g.value(logits);
        std::vector<TokenId> next(B, Vocab::kEos);
        for (std::size_t b = 0; b < B; ++b) {
            if (done[b]) continue;
            const T* row = Lg.ptr() + ((b * t) + t - 1) * V;
            TokenId best = Vocab::kEos;
            for (std::size_t j = 0; j < V; ++j) {
                if (static_cast<TokenId>(j) == Vocab::kPad) continue;
                if (row[j] > row[best]) best = static_cast<TokenId>(j);
            }
            next[b] = best;
            if (best == Vocab::kEos)
                done[b] = true;
            else
                out[b].push_back(best);
        }
        if (std::all_of(done.begin(), done.end(), [](bool x) { return x; }) || t == max_len) break;
        std::vector<TokenId> grown(B * (t + 1));
        for (std::size_t b = 0; b < B; ++b) {
            std::copy_n(prefix.begin() + static_cast<long>(b * t), t, grown.begin() + static_cast<long>(b * (t + 1)));
            grown[b * (t + 1) + t] = next[b];
        }
        prefix = std::move(grown);
    }
    return out;
}

template class Transformer<float>;
template class Transformer<double>;

template <typename Dst, typename Src>
void copy_params(nn::ParameterSet<Dst>& dst, const nn::ParameterSet<Src>& src) {
    if (dst.size() != src.size()) throw ShapeError("parameter sets differ in size");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (dst[i].name != src[i].name || dst[i].value.shape != src[i].value.shape)
            throw ShapeError("parameter mismatch at " + src[i].name);
        dst[i].value = src[i].value.template cast<Dst>();
    }
}

template void copy_params(nn::ParameterSet<float>&, const nn::ParameterSet<double>&);
template void copy_params(nn::ParameterSet<double>&, const nn::ParameterSet<float>&);
template void copy_params(nn::ParameterSet<float>&, const nn::ParameterSet<float>&);

}  // namespace mixpt::model
