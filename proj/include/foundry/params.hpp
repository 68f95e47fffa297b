#pragma once

#include <string>
#include <utility>
#include <vector>

#include "foundry/autodiff.hpp"

namespace foundry {

/// Named collection of parameter leaves. Components register their tensors
/// here so the optimizer, freeze/unfreeze schedule and checkpointing all see
/// one flat list.
struct ParamSet {
    std::vector<std::pair<std::string, ad::Var>> items;

    ad::Var add(std::string name, Tensor init, bool trainable = true) {
        ad::Var v = ad::make_leaf(std::move(init), trainable);
        items.emplace_back(std::move(name), v);
        return v;
    }

    void merge(const ParamSet& other, const std::string& prefix) {
        for (const auto& [n, v] : other.items) items.emplace_back(prefix + n, v);
    }

    ad::Var find(const std::string& name) const {
        for (const auto& [n, v] : items)
            if (n == name) return v;
        throw ArgumentError("params: unknown parameter " + name);
    }

    void set_trainable(bool trainable) {
        for (auto& [n, v] : items) {
            v->requires_grad = trainable;
            if (trainable) v->ensure_grad();
        }
    }

    void zero_grads() {
        for (auto& [n, v] : items) v->zero_grad();
    }

    std::vector<ad::Var> vars() const {
        std::vector<ad::Var> out;
        out.reserve(items.size());
        for (const auto& [n, v] : items) out.push_back(v);
        return out;
    }
};

}  // namespace foundry
