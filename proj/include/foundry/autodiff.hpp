#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "foundry/tensor.hpp"

namespace foundry::ad {

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;

    void ensure_grad();
    void zero_grad();
};

using Var = std::shared_ptr<Node>;

Var make_leaf(Tensor value, bool requires_grad);
inline Var make_const(Tensor value) { return make_leaf(std::move(value), false); }

/// Reverse-mode tape. Forward values are computed eagerly; each op records a
/// closure that scatters output gradients back to its inputs. Ops whose
/// inputs are all constant record nothing. Single-threaded by contract.
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return make_const(std::move(value)); }

    /// Seeds loss->grad with `seed` and replays recorded ops in reverse.
    /// Gradients accumulate, so one tape can backprop several scalars and
    /// several tapes can accumulate into shared parameter leaves.
    void backward(const Var& loss, double seed = 1.0);

    std::size_t num_ops() const { return ops_.size(); }

    // --- elementwise / linear algebra -------------------------------------
    Var add(const Var& a, const Var& b);
    Var sub(const Var& a, const Var& b);
    Var mul(const Var& a, const Var& b);
    Var scale(const Var& a, double c);
    Var matmul(const Var& a, const Var& b);
    Var transpose(const Var& a);
    Var add_rowvec(const Var& m, const Var& v);    // m: n x d, v: 1 x d
    Var scale_rows(const Var& m, const Var& v);    // v: n x 1
    Var div_rows(const Var& m, const Var& v);      // v: n x 1, elementwise row divide
    Var clamp_min(const Var& a, double lo);

    // --- nonlinearities ----------------------------------------------------
    Var gelu(const Var& a);
    Var sigmoid(const Var& a);
    Var softmax_rows(const Var& a);
    Var layernorm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6);

    // --- reductions ---------------------------------------------------------
    Var sum_all(const Var& a);                     // 1 x 1
    Var mean_rows(const Var& a);                   // 1 x d, column means
    Var max_rows(const Var& a);                    // 1 x d, column max (first-argmax backward)
    Var colsum_to_column(const Var& a);            // n x d -> d x 1 column sums

    // --- structure ----------------------------------------------------------
    Var slice_rows(const Var& a, std::size_t start, std::size_t count);
    Var slice_cols(const Var& a, std::size_t start, std::size_t count);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var select_rows(const Var& a, const std::vector<std::size_t>& idx);
    /// Assemble an n x d matrix from parts; part k places row j of its source
    /// at destination dest[k][j]. Destinations must cover [0, n) exactly once.
    Var place_rows(std::size_t n, const std::vector<std::pair<Var, std::vector<std::size_t>>>& parts);

    // --- losses and estimators ----------------------------------------------
    Var smooth_l1(const Var& pred, const Var& target, double beta = 1.0);  // mean reduction
    Var cross_entropy_mean(const Var& logits, const std::vector<std::size_t>& labels);
    Var kl_to_teacher_mean(const Var& student_logits, const Tensor& teacher_probs);
    /// Straight-through: forward takes the hard tensor, gradient flows to the
    /// soft surrogate with identity Jacobian.
    Var straight_through(const Var& soft, Tensor hard);

private:
    Var out(Tensor value, std::initializer_list<const Var*> inputs);
    void record(std::function<void()> fn);

    std::vector<std::function<void()>> ops_;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_coord = 0;
    bool ok(double tol) const { return max_rel_error < tol; }
};

using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Central-difference check of tape gradients for a deterministic scalar
/// function of the given inputs. Relative error uses a floor of 1e-2 on the
/// denominator so near-zero coordinates are compared absolutely.
GradCheckReport check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                double eps = 1e-5);

}  // namespace foundry::ad
