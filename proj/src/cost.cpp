#include "foundry/cost.hpp"

#include "foundry/tensor.hpp"

namespace foundry::cost {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    if (p > UINT64_MAX) throw NumericError("flop count overflow");
    return static_cast<std::uint64_t>(p);
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    if (a > UINT64_MAX - b) throw NumericError("flop count overflow");
    return a + b;
}

/// Accumulates primitive costs for the replay route. A `mac` emission is one
/// matrix product of shape (m x k)(k x n) at 2 FLOPs per multiply-accumulate.
class FlopCounter {
public:
    void mac(std::uint64_t m, std::uint64_t k, std::uint64_t n) {
        total_ = checked_add(total_, checked_mul(2, checked_mul(m, checked_mul(k, n))));
    }
    std::uint64_t total() const { return total_; }

private:
    std::uint64_t total_ = 0;
};

void emit_mlp(FlopCounter& fc, std::uint64_t n, std::uint64_t d) {
    fc.mac(n, d, 4 * d);  // up
    fc.mac(n, 4 * d, d);  // down
}

void emit_self_attention(FlopCounter& fc, std::uint64_t n, std::uint64_t d) {
    fc.mac(n, d, d);  // q
    fc.mac(n, d, d);  // k
    fc.mac(n, d, d);  // v
    fc.mac(n, d, n);  // scores
    fc.mac(n, n, d);  // weighted sum
    fc.mac(n, d, d);  // out projection
}

void emit_transformer(FlopCounter& fc, std::uint64_t layers, std::uint64_t n, std::uint64_t d) {
    for (std::uint64_t l = 0; l < layers; ++l) {
        emit_self_attention(fc, n, d);
        emit_mlp(fc, n, d);
    }
}

void emit_dso(FlopCounter& fc, std::uint64_t s, std::uint64_t n, std::uint64_t d) {
    fc.mac(s, d, d);  // supertoken queries
    fc.mac(n, d, d);  // token keys
    fc.mac(n, d, d);  // token values
    fc.mac(n, d, s);  // affinity scores
    fc.mac(s, n, d);  // grouping
    fc.mac(s, d, d);  // supertoken out projection
}

void emit_cau(FlopCounter& fc, std::uint64_t s, std::uint64_t n, std::uint64_t d,
              std::uint64_t heads) {
    for (std::uint64_t h = 0; h < heads; ++h) {
        fc.mac(s, 1, n);  // per-head map scores
        fc.mac(s, 1, n);  // per-head map application
    }
    fc.mac(n, s, d);  // broadcast supertokens back to tokens
    fc.mac(n, d, 4 * d);  // mlp up
    fc.mac(n, 4 * d, d);  // mlp down
}

void emit_gate(FlopCounter& fc, std::uint64_t n, std::uint64_t d, std::uint64_t hidden) {
    fc.mac(n, d, hidden);
    fc.mac(n, hidden, d);  // second layer counted at width d out
}

}  // namespace

std::uint64_t mlp_flops(std::uint64_t n, std::uint64_t d) {
    return checked_mul(16, checked_mul(n, checked_mul(d, d)));
}

std::uint64_t self_attention_flops(std::uint64_t n, std::uint64_t d) {
    const std::uint64_t quad = checked_mul(4, checked_mul(n, checked_mul(n, d)));
    const std::uint64_t proj = checked_mul(8, checked_mul(n, checked_mul(d, d)));
    return checked_add(quad, proj);
}

std::uint64_t transformer_flops(std::uint64_t layers, std::uint64_t n, std::uint64_t d) {
    // 4 L N D (N + 6D)
    const std::uint64_t inner = checked_add(n, checked_mul(6, d));
    return checked_mul(4, checked_mul(layers, checked_mul(n, checked_mul(d, inner))));
}

std::uint64_t dso_flops(std::uint64_t s, std::uint64_t n, std::uint64_t d) {
    // 4 D^2 (S + N) + 4 S N D
    const std::uint64_t proj = checked_mul(4, checked_mul(d, checked_mul(d, checked_add(s, n))));
    const std::uint64_t route = checked_mul(4, checked_mul(s, checked_mul(n, d)));
    return checked_add(proj, route);
}

std::uint64_t cau_flops(std::uint64_t s, std::uint64_t n, std::uint64_t d, std::uint64_t heads) {
    // 2 S N (2 nh + D) + 16 N D^2
    const std::uint64_t map =
        checked_mul(2, checked_mul(s, checked_mul(n, checked_add(checked_mul(2, heads), d))));
    return checked_add(map, mlp_flops(n, d));
}

std::uint64_t gate_flops(std::uint64_t n, std::uint64_t d, std::uint64_t hidden) {
    return checked_mul(4, checked_mul(n, checked_mul(d, hidden)));
}

std::uint64_t foundry_flops(std::uint64_t s, std::uint64_t n, std::uint64_t d,
                            std::uint64_t heads, std::uint64_t layers) {
    return checked_add(dso_flops(s, n, d),
                       checked_add(transformer_flops(layers, s, d), cau_flops(s, n, d, heads)));
}

std::uint64_t foundry_gate_flops(std::uint64_t s, std::uint64_t n, std::uint64_t r,
                                 std::uint64_t d, std::uint64_t heads, std::uint64_t layers,
                                 std::uint64_t hidden) {
    if (r > n) throw ArgumentError("foundry_gate_flops: fused count exceeds token count");
    const std::uint64_t kept = n - r;
    std::uint64_t total = gate_flops(n, d, hidden);
    total = checked_add(total, dso_flops(s, r, d));
    total = checked_add(total, transformer_flops(layers, checked_add(s, kept), d));
    total = checked_add(total, cau_flops(s, r, d, heads));
    return total;
}

std::uint64_t count_mlp(std::uint64_t n, std::uint64_t d) {
    FlopCounter fc;
    emit_mlp(fc, n, d);
    return fc.total();
}

std::uint64_t count_self_attention(std::uint64_t n, std::uint64_t d) {
    FlopCounter fc;
    emit_self_attention(fc, n, d);
    return fc.total();
}

std::uint64_t count_transformer(std::uint64_t layers, std::uint64_t n, std::uint64_t d) {
    FlopCounter fc;
    emit_transformer(fc, layers, n, d);
    return fc.total();
}

std::uint64_t count_dso(std::uint64_t s, std::uint64_t n, std::uint64_t d) {
    FlopCounter fc;
    emit_dso(fc, s, n, d);
    return fc.total();
}

std::uint64_t count_cau(std::uint64_t s, std::uint64_t n, std::uint64_t d, std::uint64_t heads) {
    FlopCounter fc;
    emit_cau(fc, s, n, d, heads);
    return fc.total();
}

std::uint64_t count_gate(std::uint64_t n, std::uint64_t d, std::uint64_t hidden) {
    FlopCounter fc;
    emit_gate(fc, n, d, hidden);
    return fc.total();
}

std::uint64_t count_foundry(std::uint64_t s, std::uint64_t n, std::uint64_t d,
                            std::uint64_t heads, std::uint64_t layers) {
    FlopCounter fc;
    emit_dso(fc, s, n, d);
    emit_transformer(fc, layers, s, d);
    emit_cau(fc, s, n, d, heads);
    return fc.total();
}

std::uint64_t count_foundry_gate(std::uint64_t s, std::uint64_t n, std::uint64_t r,
                                 std::uint64_t d, std::uint64_t heads, std::uint64_t layers,
                                 std::uint64_t hidden) {
    if (r > n) throw ArgumentError("count_foundry_gate: fused count exceeds token count");
    FlopCounter fc;
    emit_gate(fc, n, d, hidden);
    emit_dso(fc, s, r, d);
    emit_transformer(fc, layers, s + (n - r), d);
    emit_cau(fc, s, r, d, heads);
    return fc.total();
}

}  // namespace foundry::cost
