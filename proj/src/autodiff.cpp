#include "foundry/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace foundry::ad {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require_2d(const Var& v, const char* op) {
    if (v->value.rank() != 2) throw DimensionError(std::string(op) + ": rank-2 tensor required");
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                             " vs " + b->value.shape_str());
    }
}

}  // namespace

void Node::ensure_grad() {
    if (grad.data.size() != value.data.size()) {
        grad = Tensor(value.shape);
    }
}

void Node::zero_grad() {
    if (grad.data.size() == value.data.size()) {
        std::fill(grad.data.begin(), grad.data.end(), 0.0);
    }
}

Var make_leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return n;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    return make_leaf(std::move(value), requires_grad);
}

Var Tape::out(Tensor value, std::initializer_list<const Var*> inputs) {
    bool rg = false;
    for (const Var* in : inputs) rg = rg || (*in)->requires_grad;
    return make_leaf(std::move(value), rg);
}

void Tape::record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

void Tape::backward(const Var& loss, double seed) {
    if (loss->value.size() != 1) throw DimensionError("backward: loss must be scalar");
    if (!loss->requires_grad) return;
    loss->ensure_grad();
    loss->grad.data[0] += seed;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------

Var Tape::add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.data[i] += b->value.data[i];
    Var o = out(std::move(v), {&a, &b});
    if (o->requires_grad) {
        record([a, b, o] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) a->grad.data[i] += o->grad.data[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) b->grad.data[i] += o->grad.data[i];
            }
        });
    }
    return o;
}

Var Tape::sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.data[i] -= b->value.data[i];
    Var o = out(std::move(v), {&a, &b});
    if (o->requires_grad) {
        record([a, b, o] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) a->grad.data[i] += o->grad.data[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) b->grad.data[i] -= o->grad.data[i];
            }
        });
    }
    return o;
}

Var Tape::mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.data[i] *= b->value.data[i];
    Var o = out(std::move(v), {&a, &b});
    if (o->requires_grad) {
        record([a, b, o] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i)
                    a->grad.data[i] += o->grad.data[i] * b->value.data[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i)
                    b->grad.data[i] += o->grad.data[i] * a->value.data[i];
            }
        });
    }
    return o;
}

Var Tape::scale(const Var& a, double c) {
    Tensor v = a->value;
    for (auto& x : v.data) x *= c;
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) a->grad.data[i] += c * o->grad.data[i];
        });
    }
    return o;
}

Var Tape::matmul(const Var& a, const Var& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
    if (b->value.rows() != k) {
        throw DimensionError("matmul: inner extents differ: " + a->value.shape_str() + " x " +
                             b->value.shape_str());
    }
    Tensor v({m, n});
    const double* A = a->value.data.data();
    const double* B = b->value.data.data();
    double* C = v.data.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = B + p * n;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    Var o = out(std::move(v), {&a, &b});
    if (o->requires_grad) {
        record([a, b, o, m, k, n] {
            const double* G = o->grad.data.data();
            if (a->requires_grad) {
                a->ensure_grad();
                // a.grad += g . b^T
                const double* B = b->value.data.data();
                double* GA = a->grad.data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* grow = G + i * n;
                        const double* brow = B + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        GA[i * k + p] += acc;
                    }
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                // b.grad += a^T . g
                const double* A = a->value.data.data();
                double* GB = b->grad.data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = G + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A[i * k + p];
                        if (aip == 0.0) continue;
                        double* gbrow = GB + p * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                    }
                }
            }
        });
    }
    return o;
}

Var Tape::transpose(const Var& a) {
    require_2d(a, "transpose");
    const std::size_t r = a->value.rows(), c = a->value.cols();
    Tensor v({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) v.data[j * r + i] = a->value.data[i * c + j];
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, r, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    a->grad.data[i * c + j] += o->grad.data[j * r + i];
        });
    }
    return o;
}

Var Tape::add_rowvec(const Var& m, const Var& v) {
    require_2d(m, "add_rowvec");
    if (v->value.rank() != 2 || v->value.rows() != 1 || v->value.cols() != m->value.cols()) {
        throw DimensionError("add_rowvec: expected 1 x cols(m) vector");
    }
    const std::size_t r = m->value.rows(), c = m->value.cols();
    Tensor val = m->value;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) val.data[i * c + j] += v->value.data[j];
    Var o = out(std::move(val), {&m, &v});
    if (o->requires_grad) {
        record([m, v, o, r, c] {
            if (m->requires_grad) {
                m->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) m->grad.data[i] += o->grad.data[i];
            }
            if (v->requires_grad) {
                v->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) v->grad.data[j] += o->grad.data[i * c + j];
            }
        });
    }
    return o;
}

Var Tape::scale_rows(const Var& m, const Var& v) {
    require_2d(m, "scale_rows");
    if (v->value.rank() != 2 || v->value.cols() != 1 || v->value.rows() != m->value.rows()) {
        throw DimensionError("scale_rows: expected rows(m) x 1 vector");
    }
    const std::size_t r = m->value.rows(), c = m->value.cols();
    Tensor val = m->value;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) val.data[i * c + j] *= v->value.data[i];
    Var o = out(std::move(val), {&m, &v});
    if (o->requires_grad) {
        record([m, v, o, r, c] {
            if (m->requires_grad) {
                m->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        m->grad.data[i * c + j] += o->grad.data[i * c + j] * v->value.data[i];
            }
            if (v->requires_grad) {
                v->ensure_grad();
                for (std::size_t i = 0; i < r; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c; ++j)
                        acc += o->grad.data[i * c + j] * m->value.data[i * c + j];
                    v->grad.data[i] += acc;
                }
            }
        });
    }
    return o;
}

Var Tape::div_rows(const Var& m, const Var& v) {
    require_2d(m, "div_rows");
    if (v->value.rank() != 2 || v->value.cols() != 1 || v->value.rows() != m->value.rows()) {
        throw DimensionError("div_rows: expected rows(m) x 1 vector");
    }
    const std::size_t r = m->value.rows(), c = m->value.cols();
    Tensor val = m->value;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) val.data[i * c + j] /= v->value.data[i];
    Var o = out(std::move(val), {&m, &v});
    if (o->requires_grad) {
        record([m, v, o, r, c] {
            if (m->requires_grad) {
                m->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        m->grad.data[i * c + j] += o->grad.data[i * c + j] / v->value.data[i];
            }
            if (v->requires_grad) {
                v->ensure_grad();
                for (std::size_t i = 0; i < r; ++i) {
                    double acc = 0.0;
                    const double vi = v->value.data[i];
                    for (std::size_t j = 0; j < c; ++j)
                        acc += o->grad.data[i * c + j] * m->value.data[i * c + j];
                    v->grad.data[i] -= acc / (vi * vi);
                }
            }
        });
    }
    return o;
}

Var Tape::clamp_min(const Var& a, double lo) {
    Tensor v = a->value;
    for (auto& x : v.data) x = std::max(x, lo);
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, lo] {
            a->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                if (a->value.data[i] > lo) a->grad.data[i] += o->grad.data[i];
        });
    }
    return o;
}

// ---------------------------------------------------------------------------

Var Tape::gelu(const Var& a) {
    Tensor v = a->value;
    for (auto& x : v.data) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o] {
            a->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) {
                const double x = a->value.data[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                a->grad.data[i] += o->grad.data[i] * (cdf + x * pdf);
            }
        });
    }
    return o;
}

Var Tape::sigmoid(const Var& a) {
    Tensor v = a->value;
    for (auto& x : v.data) x = 1.0 / (1.0 + std::exp(-x));
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o] {
            a->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) {
                const double s = o->value.data[i];
                a->grad.data[i] += o->grad.data[i] * s * (1.0 - s);
            }
        });
    }
    return o;
}

Var Tape::softmax_rows(const Var& a) {
    require_2d(a, "softmax_rows");
    if (!a->value.all_finite()) throw NumericError("softmax_rows: non-finite input");
    const std::size_t r = a->value.rows(), c = a->value.cols();
    Tensor v({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        double mx = a->value.data[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, a->value.data[i * c + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(a->value.data[i * c + j] - mx);
            v.data[i * c + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < c; ++j) v.data[i * c + j] /= denom;
    }
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, r, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j)
                    dot += o->grad.data[i * c + j] * o->value.data[i * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    a->grad.data[i * c + j] +=
                        o->value.data[i * c + j] * (o->grad.data[i * c + j] - dot);
                }
            }
        });
    }
    return o;
}

Var Tape::layernorm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    require_2d(x, "layernorm_rows");
    const std::size_t r = x->value.rows(), c = x->value.cols();
    if (gamma->value.cols() != c || beta->value.cols() != c) {
        throw DimensionError("layernorm_rows: scale/shift must be 1 x cols(x)");
    }
    Tensor v({r, c});
    // keep normalized values and inverse stddevs for backward
    auto norm = std::make_shared<Tensor>(Tensor({r, c}));
    auto inv_sd = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += x->value.data[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = x->value.data[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double isd = 1.0 / std::sqrt(var + eps);
        (*inv_sd)[i] = isd;
        for (std::size_t j = 0; j < c; ++j) {
            const double y = (x->value.data[i * c + j] - mu) * isd;
            norm->data[i * c + j] = y;
            v.data[i * c + j] = y * gamma->value.data[j] + beta->value.data[j];
        }
    }
    Var o = out(std::move(v), {&x, &gamma, &beta});
    if (o->requires_grad) {
        record([x, gamma, beta, o, norm, inv_sd, r, c] {
            for (std::size_t i = 0; i < r; ++i) {
                if (x->requires_grad) {
                    x->ensure_grad();
                    double mean_gy = 0.0, mean_gyy = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double gy = o->grad.data[i * c + j] * gamma->value.data[j];
                        mean_gy += gy;
                        mean_gyy += gy * norm->data[i * c + j];
                    }
                    mean_gy /= static_cast<double>(c);
                    mean_gyy /= static_cast<double>(c);
                    for (std::size_t j = 0; j < c; ++j) {
                        const double gy = o->grad.data[i * c + j] * gamma->value.data[j];
                        x->grad.data[i * c + j] +=
                            (gy - mean_gy - norm->data[i * c + j] * mean_gyy) * (*inv_sd)[i];
                    }
                }
                if (gamma->requires_grad) {
                    gamma->ensure_grad();
                    for (std::size_t j = 0; j < c; ++j)
                        gamma->grad.data[j] += o->grad.data[i * c + j] * norm->data[i * c + j];
                }
                if (beta->requires_grad) {
                    beta->ensure_grad();
                    for (std::size_t j = 0; j < c; ++j) beta->grad.data[j] += o->grad.data[i * c + j];
                }
            }
        });
    }
    return o;
}

// ---------------------------------------------------------------------------

Var Tape::sum_all(const Var& a) {
    double s = 0.0;
    for (double x : a->value.data) s += x;
    Var o = out(Tensor::scalar(s), {&a});
    if (o->requires_grad) {
        record([a, o] {
            a->ensure_grad();
            const double g = o->grad.data[0];
            for (auto& gx : a->grad.data) gx += g;
        });
    }
    return o;
}

Var Tape::mean_rows(const Var& a) {
    require_2d(a, "mean_rows");
    const std::size_t r = a->value.rows(), c = a->value.cols();
    Tensor v({1, c});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) v.data[j] += a->value.data[i * c + j];
    for (auto& x : v.data) x /= static_cast<double>(r);
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, r, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    a->grad.data[i * c + j] += o->grad.data[j] / static_cast<double>(r);
        });
    }
    return o;
}

Var Tape::max_rows(const Var& a) {
    require_2d(a, "max_rows");
    const std::size_t r = a->value.rows(), c = a->value.cols();
    if (r == 0) throw DimensionError("max_rows: empty input");
    Tensor v({1, c});
    auto arg = std::make_shared<std::vector<std::size_t>>(c, 0);
    for (std::size_t j = 0; j < c; ++j) {
        double best = a->value.data[j];
        std::size_t bi = 0;
        for (std::size_t i = 1; i < r; ++i) {
            if (a->value.data[i * c + j] > best) {
                best = a->value.data[i * c + j];
                bi = i;
            }
        }
        v.data[j] = best;
        (*arg)[j] = bi;
    }
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, arg, c] {
            a->ensure_grad();
            for (std::size_t j = 0; j < c; ++j)
                a->grad.data[(*arg)[j] * c + j] += o->grad.data[j];
        });
    }
    return o;
}

Var Tape::colsum_to_column(const Var& a) {
    require_2d(a, "colsum_to_column");
    const std::size_t r = a->value.rows(), c = a->value.cols();
    Tensor v({c, 1});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) v.data[j] += a->value.data[i * c + j];
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, r, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) a->grad.data[i * c + j] += o->grad.data[j];
        });
    }
    return o;
}

// ---------------------------------------------------------------------------

Var Tape::slice_rows(const Var& a, std::size_t start, std::size_t count) {
    require_2d(a, "slice_rows");
    const std::size_t c = a->value.cols();
    if (start + count > a->value.rows()) throw DimensionError("slice_rows: out of range");
    Tensor v({count, c});
    std::copy_n(a->value.data.begin() + static_cast<long>(start * c), count * c, v.data.begin());
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, start, count, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < count * c; ++i)
                a->grad.data[start * c + i] += o->grad.data[i];
        });
    }
    return o;
}

Var Tape::slice_cols(const Var& a, std::size_t start, std::size_t count) {
    require_2d(a, "slice_cols");
    const std::size_t r = a->value.rows(), c = a->value.cols();
    if (start + count > c) throw DimensionError("slice_cols: out of range");
    Tensor v({r, count});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) v.data[i * count + j] = a->value.data[i * c + start + j];
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, start, count, r, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < count; ++j)
                    a->grad.data[i * c + start + j] += o->grad.data[i * count + j];
        });
    }
    return o;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no parts");
    const std::size_t c = parts[0]->value.cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->value.cols() != c) throw DimensionError("concat_rows: column mismatch");
        total += p->value.rows();
    }
    Tensor v({total, c});
    std::size_t off = 0;
    bool rg = false;
    for (const auto& p : parts) {
        std::copy(p->value.data.begin(), p->value.data.end(), v.data.begin() + static_cast<long>(off));
        off += p->value.size();
        rg = rg || p->requires_grad;
    }
    Var o = make_leaf(std::move(v), rg);
    if (rg) {
        record([parts, o] {
            std::size_t off = 0;
            for (const auto& p : parts) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->value.size(); ++i)
                        p->grad.data[i] += o->grad.data[off + i];
                }
                off += p->value.size();
            }
        });
    }
    return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    const std::size_t r = parts[0]->value.rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->value.rows() != r) throw DimensionError("concat_cols: row mismatch");
        total += p->value.cols();
    }
    Tensor v({r, total});
    bool rg = false;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p->value.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < pc; ++j) v.data[i * total + off + j] = p->value.data[i * pc + j];
        off += pc;
        rg = rg || p->requires_grad;
    }
    Var o = make_leaf(std::move(v), rg);
    if (rg) {
        record([parts, o, r, total] {
            std::size_t off = 0;
            for (const auto& p : parts) {
                const std::size_t pc = p->value.cols();
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < pc; ++j)
                            p->grad.data[i * pc + j] += o->grad.data[i * total + off + j];
                }
                off += pc;
            }
        });
    }
    return o;
}

Var Tape::select_rows(const Var& a, const std::vector<std::size_t>& idx) {
    require_2d(a, "select_rows");
    const std::size_t c = a->value.cols();
    Tensor v({idx.size(), c});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a->value.rows()) throw DimensionError("select_rows: index out of range");
        std::copy_n(a->value.data.begin() + static_cast<long>(idx[i] * c), c,
                    v.data.begin() + static_cast<long>(i * c));
    }
    Var o = out(std::move(v), {&a});
    if (o->requires_grad) {
        record([a, o, idx, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < c; ++j)
                    a->grad.data[idx[i] * c + j] += o->grad.data[i * c + j];
        });
    }
    return o;
}

Var Tape::place_rows(std::size_t n,
                     const std::vector<std::pair<Var, std::vector<std::size_t>>>& parts) {
    if (parts.empty()) throw DimensionError("place_rows: no parts");
    const std::size_t c = parts[0].first->value.cols();
    Tensor v({n, c});
    std::vector<bool> covered(n, false);
    bool rg = false;
    for (const auto& [p, dest] : parts) {
        if (p->value.cols() != c) throw DimensionError("place_rows: column mismatch");
        if (p->value.rows() != dest.size()) throw DimensionError("place_rows: index count mismatch");
        for (std::size_t i = 0; i < dest.size(); ++i) {
            if (dest[i] >= n || covered[dest[i]])
                throw DimensionError("place_rows: destinations must cover rows exactly once");
            covered[dest[i]] = true;
            std::copy_n(p->value.data.begin() + static_cast<long>(i * c), c,
                        v.data.begin() + static_cast<long>(dest[i] * c));
        }
        rg = rg || p->requires_grad;
    }
    for (bool b : covered)
        if (!b) throw DimensionError("place_rows: uncovered destination row");
    Var o = make_leaf(std::move(v), rg);
    if (rg) {
        record([parts, o, c] {
            for (const auto& [p, dest] : parts) {
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (std::size_t i = 0; i < dest.size(); ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        p->grad.data[i * c + j] += o->grad.data[dest[i] * c + j];
            }
        });
    }
    return o;
}

// ---------------------------------------------------------------------------

Var Tape::smooth_l1(const Var& pred, const Var& target, double beta) {
    require_same_shape(pred, target, "smooth_l1");
    if (beta <= 0.0) throw ArgumentError("smooth_l1: beta must be positive");
    const std::size_t n = pred->value.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = pred->value.data[i] - target->value.data[i];
        const double ax = std::abs(x);
        acc += (ax < beta) ? 0.5 * x * x / beta : ax - 0.5 * beta;
    }
    Var o = out(Tensor::scalar(acc / static_cast<double>(n)), {&pred, &target});
    if (o->requires_grad) {
        record([pred, target, o, beta, n] {
            const double g = o->grad.data[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double x = pred->value.data[i] - target->value.data[i];
                const double d = (std::abs(x) < beta) ? x / beta : (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
                if (pred->requires_grad) {
                    pred->ensure_grad();
                    pred->grad.data[i] += g * d;
                }
                if (target->requires_grad) {
                    target->ensure_grad();
                    target->grad.data[i] -= g * d;
                }
            }
        });
    }
    return o;
}

Var Tape::cross_entropy_mean(const Var& logits, const std::vector<std::size_t>& labels) {
    require_2d(logits, "cross_entropy_mean");
    const std::size_t n = logits->value.rows(), k = logits->value.cols();
    if (labels.size() != n) throw DimensionError("cross_entropy_mean: label count mismatch");
    auto probs = std::make_shared<Tensor>(Tensor({n, k}));
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= k) throw ArgumentError("cross_entropy_mean: label out of range");
        double mx = logits->value.data[i * k];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits->value.data[i * k + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double e = std::exp(logits->value.data[i * k + j] - mx);
            probs->data[i * k + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < k; ++j) probs->data[i * k + j] /= denom;
        loss -= std::log(std::max(probs->data[i * k + labels[i]], 1e-300));
    }
    Var o = out(Tensor::scalar(loss / static_cast<double>(n)), {&logits});
    if (o->requires_grad) {
        record([logits, o, probs, labels, n, k] {
            logits->ensure_grad();
            const double g = o->grad.data[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    const double onehot = (labels[i] == j) ? 1.0 : 0.0;
                    logits->grad.data[i * k + j] += g * (probs->data[i * k + j] - onehot);
                }
        });
    }
    return o;
}

Var Tape::kl_to_teacher_mean(const Var& student_logits, const Tensor& teacher_probs) {
    require_2d(student_logits, "kl_to_teacher_mean");
    if (!student_logits->value.same_shape(teacher_probs))
        throw DimensionError("kl_to_teacher_mean: shape mismatch");
    const std::size_t n = student_logits->value.rows(), k = student_logits->value.cols();
    auto q = std::make_shared<Tensor>(Tensor({n, k}));
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = student_logits->value.data[i * k];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, student_logits->value.data[i * k + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double e = std::exp(student_logits->value.data[i * k + j] - mx);
            q->data[i * k + j] = e;
            denom += e;
        }
        const double logdenom = std::log(denom);
        for (std::size_t j = 0; j < k; ++j) {
            q->data[i * k + j] /= denom;
            const double p = teacher_probs.data[i * k + j];
            if (p > 0.0) {
                const double logq = (student_logits->value.data[i * k + j] - mx) - logdenom;
                loss += p * (std::log(p) - logq);
            }
        }
    }
    Var o = out(Tensor::scalar(loss / static_cast<double>(n)), {&student_logits});
    if (o->requires_grad) {
        record([student_logits, o, q, teacher_probs, n, k] {
            student_logits->ensure_grad();
            const double g = o->grad.data[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j)
                    student_logits->grad.data[i * k + j] +=
                        g * (q->data[i * k + j] - teacher_probs.data[i * k + j]);
        });
    }
    return o;
}

Var Tape::straight_through(const Var& soft, Tensor hard) {
    if (!soft->value.same_shape(hard)) throw DimensionError("straight_through: shape mismatch");
    Var o = out(std::move(hard), {&soft});
    if (o->requires_grad) {
        record([soft, o] {
            soft->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) soft->grad.data[i] += o->grad.data[i];
        });
    }
    return o;
}

// ---------------------------------------------------------------------------

GradCheckReport check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps) {
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    Tape tape;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    Var loss = f(tape, leaves);
    tape.backward(loss);

    auto eval = [&](const std::vector<Tensor>& xs) {
        Tape t2;
        std::vector<Var> ls;
        ls.reserve(xs.size());
        for (const auto& x : xs) ls.push_back(t2.leaf(x, false));
        return f(t2, ls)->value.scalar_value();
    };

    GradCheckReport rep;
    std::vector<Tensor> probe = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double orig = probe[k].data[i];
            probe[k].data[i] = orig + eps;
            const double fp = eval(probe);
            probe[k].data[i] = orig - eps;
            const double fm = eval(probe);
            probe[k].data[i] = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double an = leaves[k]->grad.data[i];
            if (!std::isfinite(an) || !std::isfinite(fd))
                throw NumericError("check_gradients: non-finite gradient");
            const double abs_err = std::abs(fd - an);
            const double rel = abs_err / std::max({std::abs(fd), std::abs(an), 1e-2});
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_input = k;
                rep.worst_coord = i;
            }
            rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
        }
    }
    return rep;
}

}  // namespace foundry::ad
