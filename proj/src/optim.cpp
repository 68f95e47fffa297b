#include "foundry/optim.hpp"

#include <cmath>

namespace foundry {

AdamW::AdamW(AdamWConfig cfg, const ParamSet& params) : cfg_(cfg) {
    slots_.reserve(params.items.size());
    for (const auto& [name, var] : params.items) {
        Slot s;
        s.param = var;
        s.m = Tensor(var->value.shape);
        s.v = Tensor(var->value.shape);
        slots_.push_back(std::move(s));
        names_.push_back(name);
    }
}

void AdamW::exempt_from_decay(const std::string& fragment) {
    for (std::size_t i = 0; i < slots_.size(); ++i)
        if (names_[i].find(fragment) != std::string::npos) slots_[i].decay = false;
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& s : slots_) {
        if (!s.param->requires_grad) continue;
        s.param->ensure_grad();
        const auto& g = s.param->grad.data;
        auto& p = s.param->value.data;
        for (std::size_t i = 0; i < p.size(); ++i) {
            s.m.data[i] = cfg_.beta1 * s.m.data[i] + (1.0 - cfg_.beta1) * g[i];
            s.v.data[i] = cfg_.beta2 * s.v.data[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = s.m.data[i] / bc1;
            const double vhat = s.v.data[i] / bc2;
            double upd = mhat / (std::sqrt(vhat) + cfg_.eps);
            if (s.decay) upd += cfg_.weight_decay * p[i];
            p[i] -= lr * upd;
        }
    }
}

double LrSchedule::at(std::size_t epoch) const {
    if (total_epochs == 0) throw ArgumentError("lr schedule: total_epochs must be positive");
    if (warmup_epochs > 0 && epoch < warmup_epochs) {
        const double f = static_cast<double>(epoch) / static_cast<double>(warmup_epochs);
        return start_lr + f * (peak_lr - start_lr);
    }
    const std::size_t span = total_epochs > warmup_epochs ? total_epochs - warmup_epochs : 1;
    const std::size_t into = epoch >= warmup_epochs ? epoch - warmup_epochs : 0;
    const double f = std::min(1.0, static_cast<double>(into) / static_cast<double>(span));
    const double cosine = 0.5 * (1.0 + std::cos(f * 3.14159265358979323846));
    return final_lr + cosine * (peak_lr - final_lr);
}

}  // namespace foundry
