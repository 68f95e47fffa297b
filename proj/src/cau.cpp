#include "foundry/cau.hpp"

#include "foundry/rng.hpp"

namespace foundry {

CauParams CauParams::init(const CauConfig& cfg, std::uint64_t seed) {
    auto rng = make_stream(seed, "cau-init");
    const double sigma = 0.02;
    CauParams cp;
    cp.config = cfg;
    cp.w1 = cp.params.add("cau.w1", trunc_normal_tensor(rng, cfg.d, cfg.d, sigma));
    cp.b1 = cp.params.add("cau.b1", Tensor::zeros(1, cfg.d));
    cp.w2 = cp.params.add("cau.w2", trunc_normal_tensor(rng, cfg.d, cfg.d, sigma));
    cp.b2 = cp.params.add("cau.b2", Tensor::zeros(1, cfg.d));
    if (cfg.output_ln) {
        cp.ln_g = cp.params.add("cau.ln.g", Tensor::full(1, cfg.d, 1.0));
        cp.ln_b = cp.params.add("cau.ln.b", Tensor::zeros(1, cfg.d));
    }
    return cp;
}

ad::Var cau_forward(ad::Tape& tape, const ad::Var& tokens, const ad::Var& cam,
                    const ad::Var& supertokens, const CauParams& params, bool require_hard) {
    if (cam->value.rows() != tokens->value.rows() ||
        cam->value.cols() != supertokens->value.rows())
        throw DimensionError("cau_forward: cam shape must be tokens x supertokens");
    if (require_hard) {
        const Tensor& m = cam->value;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            std::size_t ones = 0;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                const double v = m.at(i, j);
                if (v == 1.0)
                    ++ones;
                else if (v != 0.0)
                    throw ContractError("cau_forward: assignment map is not one-hot");
            }
            if (ones != 1) throw ContractError("cau_forward: assignment map is not one-hot");
        }
    }
    ad::Var x = tape.add(tokens, tape.matmul(cam, supertokens));
    ad::Var h = tape.gelu(tape.add_rowvec(tape.matmul(x, params.w1), params.b1));
    ad::Var y = tape.add_rowvec(tape.matmul(h, params.w2), params.b2);
    if (params.config.output_ln) y = tape.layernorm_rows(y, params.ln_g, params.ln_b);
    return y;
}

}  // namespace foundry
