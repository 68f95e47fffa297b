#pragma once

#include <cstdint>

namespace foundry::cost {

/// Analytical FLOP counts. Conventions: one multiply-accumulate is 2 FLOPs,
/// layer norms, softmax normalization and residual adds are free, the fused
/// QKV projection is counted as three separate projections, and the MLP ratio
/// is fixed at 4. All results are exact integers; overflow raises
/// NumericError.

std::uint64_t mlp_flops(std::uint64_t n, std::uint64_t d);
std::uint64_t self_attention_flops(std::uint64_t n, std::uint64_t d);
std::uint64_t transformer_flops(std::uint64_t layers, std::uint64_t n, std::uint64_t d);

/// Supertoken compression: Q/K/V plus an output projection on the s
/// supertokens, affinity scores, and the grouping matmul.
std::uint64_t dso_flops(std::uint64_t s, std::uint64_t n, std::uint64_t d);

/// Upsampling: per-head cross-attention map over s x n, broadcast of the
/// supertokens back to n rows, and the reconstruction MLP.
std::uint64_t cau_flops(std::uint64_t s, std::uint64_t n, std::uint64_t d, std::uint64_t heads);

/// Token selector MLP; the second layer is counted at width d on both sides.
std::uint64_t gate_flops(std::uint64_t n, std::uint64_t d, std::uint64_t hidden);

/// DSO + transformer over s tokens + CAU.
std::uint64_t foundry_flops(std::uint64_t s, std::uint64_t n, std::uint64_t d,
                            std::uint64_t heads, std::uint64_t layers);

/// Gated variant: r of the n tokens are fused through the DSO/CAU path, the
/// remaining n - r pass straight to the encoder alongside the s supertokens.
std::uint64_t foundry_gate_flops(std::uint64_t s, std::uint64_t n, std::uint64_t r,
                                 std::uint64_t d, std::uint64_t heads, std::uint64_t layers,
                                 std::uint64_t hidden);

/// Independent route: replays each architecture as a sequence of primitive
/// matmul emissions under the same conventions and sums their costs. Used to
/// cross-check the closed forms.
std::uint64_t count_mlp(std::uint64_t n, std::uint64_t d);
std::uint64_t count_self_attention(std::uint64_t n, std::uint64_t d);
std::uint64_t count_transformer(std::uint64_t layers, std::uint64_t n, std::uint64_t d);
std::uint64_t count_dso(std::uint64_t s, std::uint64_t n, std::uint64_t d);
std::uint64_t count_cau(std::uint64_t s, std::uint64_t n, std::uint64_t d, std::uint64_t heads);
std::uint64_t count_gate(std::uint64_t n, std::uint64_t d, std::uint64_t hidden);
std::uint64_t count_foundry(std::uint64_t s, std::uint64_t n, std::uint64_t d,
                            std::uint64_t heads, std::uint64_t layers);
std::uint64_t count_foundry_gate(std::uint64_t s, std::uint64_t n, std::uint64_t r,
                                 std::uint64_t d, std::uint64_t heads, std::uint64_t layers,
                                 std::uint64_t hidden);

}  // namespace foundry::cost
