#include "foundry/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "foundry/rng.hpp"

namespace foundry {

EncoderParams EncoderParams::init(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.head_dim();  // validate
    auto rng = make_stream(seed, "encoder-init");
    const double sigma = 0.02;
    const std::size_t d = cfg.d;
    const std::size_t hidden = cfg.mlp_ratio * d;
    // GPT-2 style depth rescaling on residual-branch output projections.
    const double resid_scale = cfg.layers > 0 ? 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.layers)) : 1.0;

    EncoderParams ep;
    ep.config = cfg;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        EncoderLayerParams lp;
        lp.ln1_g = ep.params.add(p + "ln1.g", Tensor::full(1, d, 1.0));
        lp.ln1_b = ep.params.add(p + "ln1.b", Tensor::zeros(1, d));
        lp.w_qkv = ep.params.add(p + "attn.w_qkv", trunc_normal_tensor(rng, d, 3 * d, sigma));
        lp.b_qkv = ep.params.add(p + "attn.b_qkv", Tensor::zeros(1, 3 * d));
        Tensor wo = trunc_normal_tensor(rng, d, d, sigma);
        for (auto& v : wo.data) v *= resid_scale;
        lp.w_o = ep.params.add(p + "attn.w_o", std::move(wo));
        lp.b_o = ep.params.add(p + "attn.b_o", Tensor::zeros(1, d));
        lp.ln2_g = ep.params.add(p + "ln2.g", Tensor::full(1, d, 1.0));
        lp.ln2_b = ep.params.add(p + "ln2.b", Tensor::zeros(1, d));
        lp.w_fc1 = ep.params.add(p + "mlp.w_fc1", trunc_normal_tensor(rng, d, hidden, sigma));
        lp.b_fc1 = ep.params.add(p + "mlp.b_fc1", Tensor::zeros(1, hidden));
        Tensor w2 = trunc_normal_tensor(rng, hidden, d, sigma);
        for (auto& v : w2.data) v *= resid_scale;
        lp.w_fc2 = ep.params.add(p + "mlp.w_fc2", std::move(w2));
        lp.b_fc2 = ep.params.add(p + "mlp.b_fc2", Tensor::zeros(1, d));
        ep.layers.push_back(std::move(lp));
    }
    return ep;
}

EncoderParams EncoderParams::clone(const std::string& prefix, std::size_t layer_count) const {
    EncoderParams ep;
    ep.config = config;
    ep.config.layers = std::min(layer_count, layers.size());
    for (std::size_t l = 0; l < ep.config.layers; ++l) {
        const std::string p = prefix + "layer" + std::to_string(l) + ".";
        const auto& src = layers[l];
        EncoderLayerParams lp;
        lp.ln1_g = ep.params.add(p + "ln1.g", src.ln1_g->value);
        lp.ln1_b = ep.params.add(p + "ln1.b", src.ln1_b->value);
        lp.w_qkv = ep.params.add(p + "attn.w_qkv", src.w_qkv->value);
        lp.b_qkv = ep.params.add(p + "attn.b_qkv", src.b_qkv->value);
        lp.w_o = ep.params.add(p + "attn.w_o", src.w_o->value);
        lp.b_o = ep.params.add(p + "attn.b_o", src.b_o->value);
        lp.ln2_g = ep.params.add(p + "ln2.g", src.ln2_g->value);
        lp.ln2_b = ep.params.add(p + "ln2.b", src.ln2_b->value);
        lp.w_fc1 = ep.params.add(p + "mlp.w_fc1", src.w_fc1->value);
        lp.b_fc1 = ep.params.add(p + "mlp.b_fc1", src.b_fc1->value);
        lp.w_fc2 = ep.params.add(p + "mlp.w_fc2", src.w_fc2->value);
        lp.b_fc2 = ep.params.add(p + "mlp.b_fc2", src.b_fc2->value);
        ep.layers.push_back(std::move(lp));
    }
    return ep;
}

ad::Var encode(ad::Tape& tape, const ad::Var& tokens, const EncoderParams& params) {
    const auto& cfg = params.config;
    if (tokens->value.cols() != cfg.d)
        throw DimensionError("encode: token dim != encoder dim");
    const std::size_t hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    ad::Var x = tokens;
    for (const auto& lp : params.layers) {
        // attention block
        ad::Var xn = tape.layernorm_rows(x, lp.ln1_g, lp.ln1_b);
        ad::Var qkv = tape.add_rowvec(tape.matmul(xn, lp.w_qkv), lp.b_qkv);
        ad::Var q = tape.slice_cols(qkv, 0, cfg.d);
        ad::Var k = tape.slice_cols(qkv, cfg.d, cfg.d);
        ad::Var v = tape.slice_cols(qkv, 2 * cfg.d, cfg.d);
        std::vector<ad::Var> head_outs;
        head_outs.reserve(cfg.heads);
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            ad::Var qh = tape.slice_cols(q, h * hd, hd);
            ad::Var kh = tape.slice_cols(k, h * hd, hd);
            ad::Var vh = tape.slice_cols(v, h * hd, hd);
            ad::Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), scale);
            ad::Var attn = tape.softmax_rows(scores);
            head_outs.push_back(tape.matmul(attn, vh));
        }
        ad::Var merged = cfg.heads == 1 ? head_outs[0] : tape.concat_cols(head_outs);
        ad::Var attn_out = tape.add_rowvec(tape.matmul(merged, lp.w_o), lp.b_o);
        x = tape.add(x, attn_out);

        // mlp block
        ad::Var xn2 = tape.layernorm_rows(x, lp.ln2_g, lp.ln2_b);
        ad::Var h1 = tape.gelu(tape.add_rowvec(tape.matmul(xn2, lp.w_fc1), lp.b_fc1));
        ad::Var h2 = tape.add_rowvec(tape.matmul(h1, lp.w_fc2), lp.b_fc2);
        x = tape.add(x, h2);
    }
    return x;
}

}  // namespace foundry
