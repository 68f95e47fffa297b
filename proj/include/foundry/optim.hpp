#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foundry/params.hpp"

namespace foundry {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
};

/// AdamW with decoupled weight decay. Parameters registered with
/// `decay = false` (gate scores, biases if desired) skip the decay term.
/// Frozen parameters (requires_grad false) are skipped entirely; their moment
/// state is kept so freeze/unfreeze schedules resume cleanly.
class AdamW {
public:
    AdamW(AdamWConfig cfg, const ParamSet& params);

    /// Marks every parameter whose name contains `fragment` as decay-exempt.
    void exempt_from_decay(const std::string& fragment);

    /// One update over all trainable parameters using their accumulated
    /// gradients. Caller zeroes gradients between steps.
    void step(double lr);

    std::size_t t() const { return t_; }

private:
    struct Slot {
        ad::Var param;
        Tensor m, v;
        bool decay = true;
    };
    AdamWConfig cfg_;
    std::vector<Slot> slots_;
    std::vector<std::string> names_;
    std::size_t t_ = 0;
};

struct LrSchedule {
    double start_lr = 1e-6;
    double peak_lr = 1e-3;
    double final_lr = 1e-6;
    std::size_t warmup_epochs = 15;
    std::size_t total_epochs = 100;

    /// Linear ramp start -> peak over the warmup, then cosine peak -> final.
    double at(std::size_t epoch) const;
};

}  // namespace foundry
