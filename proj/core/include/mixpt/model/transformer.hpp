#pragma once

#include <cstdint>
#include <vector>

#include "mixpt/mixture/batch.hpp"
#include "mixpt/model/config.hpp"
#include "mixpt/model/vocab.hpp"
#include "mixpt/nn/graph.hpp"

namespace mixpt::model {

// Pre-norm encoder-decoder. The encoder reads [patch tokens ++ prompt
// tokens]; the decoder sees the image only through cross-attention. Output
// logits reuse the token embedding table.
template <typename T>
class Transformer {
public:
    Transformer(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    nn::ParameterSet<T>& params() { return params_; }
    const nn::ParameterSet<T>& params() const { return params_; }

    struct Output {
        nn::Var logits;  // [B, target_len, V]
        nn::Var loss;    // mean over loss_mask positions
    };

    // Teacher-forced pass; decoder input is the target shifted right behind pad.
    Output forward(nn::Graph<T>& g, const mixture::Batch& batch);

    // Mean token loss of each example, evaluated without recording.
    std::vector<double> per_example_losses(const mixture::Batch& batch);

    // Greedy decoding for every example in the batch (targets ignored). Stops
    // at eos or max_len; pad is never emitted; eos is not included.
    std::vector<std::vector<TokenId>> generate(const mixture::Batch& batch, std::size_t max_len);

private:
    struct Layer {
        nn::Parameter<T>* ln1_g;
        nn::Parameter<T>* ln1_b;
        nn::Parameter<T>* wq;
        nn::Parameter<T>* bq;
        nn::Parameter<T>* wk;
        nn::Parameter<T>* bk = nullptr;
        nn::Parameter<T>* wv;
        nn::Parameter<T>* bv;
        nn::Parameter<T>* wo;
        nn::Parameter<T>* bo;
        // cross-attention, decoder only
        nn::Parameter<T>* lnx_g = nullptr;
        nn::Parameter<T>* lnx_b = nullptr;
        nn::Parameter<T>* xq = nullptr;
        nn::Parameter<T>* xbq = nullptr;
        nn::Parameter<T>* xk = nullptr;
        nn::Parameter<T>* xbk = nullptr;
        nn::Parameter<T>* xv = nullptr;
        nn::Parameter<T>* xbv = nullptr;
        nn::Parameter<T>* xo = nullptr;
        nn::Parameter<T>* xbo = nullptr;
        nn::Parameter<T>* ln2_g;
        nn::Parameter<T>* ln2_b;
        nn::Parameter<T>* w1;
        nn::Parameter<T>* b1;
        nn::Parameter<T>* w2;
        nn::Parameter<T>* b2;
    };

    nn::Var encode(nn::Graph<T>& g, const mixture::Batch& batch);
    nn::Var decode(nn::Graph<T>& g, nn::Var memory, const nn::Tensor<T>& memory_mask_row,
                   const std::vector<TokenId>& dec_in, std::size_t batch, std::size_t len);
    nn::Var attend(nn::Graph<T>& g, nn::Var x_q, nn::Var x_kv, nn::Parameter<T>* wq, nn::Parameter<T>* bq,
                   nn::Parameter<T>* wk, nn::Parameter<T>* bk, nn::Parameter<T>* wv, nn::Parameter<T>* bv,
                   nn::Parameter<T>* wo, nn::Parameter<T>* bo, nn::Var mask);
    nn::Var linear(nn::Graph<T>& g, nn::Var x, nn::Parameter<T>* w, nn::Parameter<T>* b);
    // Key-padding row per example: 0 for vision and real prompt tokens, -inf for pad. [B, S]
    nn::Tensor<T> memory_key_mask(const mixture::Batch& batch) const;

    ModelConfig cfg_;
    nn::ParameterSet<T> params_;
    nn::Parameter<T>* patch_w_;
    nn::Parameter<T>* patch_b_;
    nn::Parameter<T>* tok_emb_;
    nn::Parameter<T>* pos_vision_;
    nn::Parameter<T>* pos_prompt_;
    nn::Parameter<T>* pos_target_;
    nn::Parameter<T>* type_emb_;  // [2, d]: vision, text
    std::vector<Layer> enc_;
    std::vector<Layer> dec_;
    nn::Parameter<T>* enc_ln_g_;
    nn::Parameter<T>* enc_ln_b_;
    nn::Parameter<T>* dec_ln_g_;
    nn::Parameter<T>* dec_ln_b_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

// Copies values between precisions; parameter names and shapes must agree.
template <typename Dst, typename Src>
void copy_params(nn::ParameterSet<Dst>& dst, const nn::ParameterSet<Src>& src);

}  // namespace mixpt::model
