#pragma once

// Differentiable numeric kernels with explicit forward/backward pairs,
// the named parameter store, AdamW, the cosine schedule, and a central
// finite-difference gradient checker.
//
// Backward functions accumulate (+=) into gradient buffers so multiple
// consumers of one value compose by simple repeated calls.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <type_traits>

#include "veloattn/common.hpp"

namespace veloattn {

// ---------------------------------------------------------------------------
// ParamStore: named, shaped value arrays with paired gradient buffers.
// std::map keeps entry references stable and iteration name-sorted, which
// makes optimizer traversal and checkpoint layout deterministic.
// ---------------------------------------------------------------------------

template <class T>
struct Param {
    std::string name;
    std::vector<size_t> shape;
    std::vector<T> values;
    std::vector<T> grads;

    size_t size() const { return values.size(); }
    size_t dim(size_t i) const { return shape.at(i); }
};

template <class T>
class ParamStore {
public:
    Param<T>& create(const std::string& name, std::vector<size_t> shape) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        auto [it, inserted] = entries_.try_emplace(name);
        if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
        Param<T>& p = it->second;
        p.name = name;
        p.shape = std::move(shape);
        p.values.assign(n, T(0));
        p.grads.assign(n, T(0));
        return p;
    }

    Param<T>& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
        return it->second;
    }
    const Param<T>& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    size_t count() const { return entries_.size(); }

    size_t total_size() const {
        size_t n = 0;
        for (const auto& [_, p] : entries_) n += p.size();
        return n;
    }

    void zero_grads() {
        for (auto& [_, p] : entries_) std::fill(p.grads.begin(), p.grads.end(), T(0));
    }

    void scale_grads(T s) {
        for (auto& [_, p] : entries_)
            for (T& g : p.grads) g *= s;
    }

    // name-sorted iteration
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::map<std::string, Param<T>> entries_;
};

// ---------------------------------------------------------------------------
// linear: y = x W (+ b).  W is in x out, row-major.
// ---------------------------------------------------------------------------

template <class T>
void check_dims(const char* op, const char* a_name, size_t a, const char* b_name, size_t b) {
    if (a != b)
        throw DimensionError(std::string(op) + ": " + a_name + "=" + std::to_string(a) +
                             " does not match " + b_name + "=" + std::to_string(b));
}

template <class T>
void linear_forward(const Matrix<T>& x, const Param<T>& w, const std::type_identity_t<Param<T>>* b,
                    Matrix<T>& y) {
    const size_t n = x.rows(), in = x.cols();
    check_dims<T>("linear", "x.cols", in, (w.name + ".rows").c_str(), w.dim(0));
    const size_t out = w.dim(1);
    if (b) check_dims<T>("linear", "b.size", b->size(), (w.name + ".cols").c_str(), out);
    y.resize(n, out);
    const T* wd = w.values.data();
    for (size_t r = 0; r < n; ++r) {
        const T* xr = x.row(r);
        T* yr = y.row(r);
        if (b) {
            for (size_t o = 0; o < out; ++o) yr[o] = b->values[o];
        }
        for (size_t i = 0; i < in; ++i) {
            const T xi = xr[i];
            const T* wrow = wd + i * out;
            for (size_t o = 0; o < out; ++o) yr[o] += xi * wrow[o];
        }
    }
}

// Accumulates dW, db and (optionally) dx.
template <class T>
void linear_backward(const Matrix<T>& x, Param<T>& w, std::type_identity_t<Param<T>>* b,
                     const Matrix<T>& dy, std::type_identity_t<Matrix<T>>* dx) {
    const size_t n = x.rows(), in = x.cols(), out = w.dim(1);
    const T* wd = w.values.data();
    T* gw = w.grads.data();
    for (size_t r = 0; r < n; ++r) {
        const T* xr = x.row(r);
        const T* dyr = dy.row(r);
        if (b) {
            for (size_t o = 0; o < out; ++o) b->grads[o] += dyr[o];
        }
        for (size_t i = 0; i < in; ++i) {
            const T xi = xr[i];
            T* gwrow = gw + i * out;
            const T* wrow = wd + i * out;
            T acc = T(0);
            for (size_t o = 0; o < out; ++o) {
                gwrow[o] += xi * dyr[o];
                acc += wrow[o] * dyr[o];
            }
            if (dx) (*dx)(r, i) += acc;
        }
    }
}

// ---------------------------------------------------------------------------
// GELU, exact erf form: gelu(x) = x * Phi(x).
// ---------------------------------------------------------------------------

template <class T>
T gelu_scalar(T x) {
    const double xd = static_cast<double>(x);
    const double phi = 0.5 * (1.0 + std::erf(xd / std::numbers::sqrt2));
    return static_cast<T>(xd * phi);
}

template <class T>
T gelu_grad_scalar(T x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * std::numbers::pi);
    return static_cast<T>(cdf + xd * pdf);
}

template <class T>
void gelu_forward(const Matrix<T>& x, Matrix<T>& y) {
    y.resize(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) y.data()[i] = gelu_scalar(x.data()[i]);
}

template <class T>
void gelu_backward(const Matrix<T>& x, const Matrix<T>& dy, Matrix<T>& dx) {
    for (size_t i = 0; i < x.size(); ++i) dx.data()[i] += dy.data()[i] * gelu_grad_scalar(x.data()[i]);
}

// ---------------------------------------------------------------------------
// LayerNorm over the feature axis (per row), then affine gamma/beta.
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

template <class T>
struct LayerNormCache {
    std::vector<T> rstd;     // per row
    Matrix<T> normalized;    // x_hat
};

template <class T>
void layer_norm_forward(const Matrix<T>& x, const Param<T>& gamma, const Param<T>& beta,
                        Matrix<T>& y, LayerNormCache<T>& cache, double eps = kLayerNormEps) {
    const size_t n = x.rows(), d = x.cols();
    check_dims<T>("layer_norm", "x.cols", d, "gamma.size", gamma.size());
    y.resize(n, d);
    cache.rstd.assign(n, T(0));
    cache.normalized.resize(n, d);
    for (size_t r = 0; r < n; ++r) {
        const T* xr = x.row(r);
        T mean = T(0);
        for (size_t c = 0; c < d; ++c) mean += xr[c];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (size_t c = 0; c < d; ++c) {
            const T dv = xr[c] - mean;
            var += dv * dv;
        }
        var /= static_cast<T>(d);
        const T rstd = T(1) / std::sqrt(var + static_cast<T>(eps));
        cache.rstd[r] = rstd;
        T* nr = cache.normalized.row(r);
        T* yr = y.row(r);
        for (size_t c = 0; c < d; ++c) {
            nr[c] = (xr[c] - mean) * rstd;
            yr[c] = nr[c] * gamma.values[c] + beta.values[c];
        }
    }
}

template <class T>
void layer_norm_backward(const Matrix<T>& dy, Param<T>& gamma, Param<T>& beta,
                         const LayerNormCache<T>& cache, Matrix<T>& dx) {
    const size_t n = dy.rows(), d = dy.cols();
    for (size_t r = 0; r < n; ++r) {
        const T* dyr = dy.row(r);
        const T* nr = cache.normalized.row(r);
        T sum_dyh = T(0), sum_dyh_n = T(0);
        for (size_t c = 0; c < d; ++c) {
            const T dyh = dyr[c] * gamma.values[c];
            sum_dyh += dyh;
            sum_dyh_n += dyh * nr[c];
            gamma.grads[c] += dyr[c] * nr[c];
            beta.grads[c] += dyr[c];
        }
        const T inv_d = T(1) / static_cast<T>(d);
        for (size_t c = 0; c < d; ++c) {
            const T dyh = dyr[c] * gamma.values[c];
            dx(r, c) += cache.rstd[r] * (dyh - sum_dyh * inv_d - nr[c] * sum_dyh_n * inv_d);
        }
    }
}

// ---------------------------------------------------------------------------
// softmax with max subtraction. axis 1 = along each row, axis 0 = along each
// column. The strided form is reused for per-channel attention over neighbor
// blocks.
// ---------------------------------------------------------------------------

// In-place softmax over `count` elements starting at p with stride `stride`.
template <class T>
void softmax_strided(T* p, size_t count, size_t stride) {
    T mx = p[0];
    for (size_t i = 1; i < count; ++i) mx = std::max(mx, p[i * stride]);
    T sum = T(0);
    for (size_t i = 0; i < count; ++i) {
        const T e = std::exp(p[i * stride] - mx);
        p[i * stride] = e;
        sum += e;
    }
    const T inv = T(1) / sum;
    for (size_t i = 0; i < count; ++i) p[i * stride] *= inv;
}

template <class T>
Matrix<T> softmax(const Matrix<T>& x, int axis) {
    Matrix<T> y = x;
    if (axis == 1) {
        for (size_t r = 0; r < y.rows(); ++r) softmax_strided(y.row(r), y.cols(), 1);
    } else if (axis == 0) {
        for (size_t c = 0; c < y.cols(); ++c) softmax_strided(y.data() + c, y.rows(), y.cols());
    } else {
        throw ArgumentError("softmax: axis must be 0 or 1");
    }
    return y;
}

// d/dlogits given softmax output a and upstream da, along a strided slice.
template <class T>
void softmax_backward_strided(const T* a, const T* da, T* dlogits, size_t count, size_t stride) {
    T dot = T(0);
    for (size_t i = 0; i < count; ++i) dot += a[i * stride] * da[i * stride];
    for (size_t i = 0; i < count; ++i)
        dlogits[i * stride] += a[i * stride] * (da[i * stride] - dot);
}

// ---------------------------------------------------------------------------
// AdamW: decoupled weight decay, bias-corrected moments.
// ---------------------------------------------------------------------------

template <class T>
class AdamW {
public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.01)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    long step_count() const { return t_; }
    double weight_decay() const { return weight_decay_; }

    void step(ParamStore<T>& params, double lr) {
        for (const auto& [name, p] : params) {
            if (!all_finite(p.grads))
                throw NumericError("adamw: non-finite gradient in parameter '" + name + "'");
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (auto& [name, p] : params) {
            Moments& mom = state_[name];
            if (mom.m.size() != p.size()) {
                mom.m.assign(p.size(), T(0));
                mom.v.assign(p.size(), T(0));
            }
            for (size_t i = 0; i < p.size(); ++i) {
                const double g = static_cast<double>(p.grads[i]);
                double m = beta1_ * static_cast<double>(mom.m[i]) + (1.0 - beta1_) * g;
                double v = beta2_ * static_cast<double>(mom.v[i]) + (1.0 - beta2_) * g * g;
                mom.m[i] = static_cast<T>(m);
                mom.v[i] = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                double pv = static_cast<double>(p.values[i]);
                pv -= lr * weight_decay_ * pv;
                pv -= lr * mhat / (std::sqrt(vhat) + eps_);
                p.values[i] = static_cast<T>(pv);
            }
            std::fill(p.grads.begin(), p.grads.end(), T(0));
            if (!all_finite(p.values))
                throw NumericError("adamw: non-finite value in parameter '" + name + "' after step");
        }
    }

private:
    struct Moments {
        std::vector<T> m, v;
    };
    std::map<std::string, Moments> state_;
    long t_ = 0;
    double beta1_, beta2_, eps_, weight_decay_;
};

// ---------------------------------------------------------------------------
// Cosine annealing schedule, stepped once per epoch.
// ---------------------------------------------------------------------------

struct LrSchedule {
    double lr0 = 5e-4;
    long total_steps = 50;
    double eta_min = 0.0;
};

inline double cosine_lr(const LrSchedule& s, long step) {
    if (step < 0 || step > s.total_steps)
        throw ArgumentError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(s.total_steps) + "]");
    const double frac = static_cast<double>(step) / static_cast<double>(s.total_steps);
    return s.eta_min + 0.5 * (s.lr0 - s.eta_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

// ---------------------------------------------------------------------------
// grad_check: central finite differences against analytic gradients.
//
// `loss_fn` must zero the grads, run forward+backward and return the loss;
// it is re-invoked with perturbed parameter values for the numeric side.
// Relative error uses a 1e-3 absolute floor in the denominator so that
// finite-difference noise on near-zero gradients does not dominate.
// ---------------------------------------------------------------------------

struct GradCheckFailure {
    std::string name;
    size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_name;
    size_t checked = 0;
    std::vector<GradCheckFailure> failures;

    bool pass() const { return failures.empty(); }
};

template <class T>
GradCheckReport grad_check(ParamStore<T>& params, const std::function<double()>& loss_fn,
                           double h = 1e-5, double tolerance = 1e-4) {
    GradCheckReport report;
    loss_fn();
    std::map<std::string, std::vector<T>> analytic;
    for (const auto& [name, p] : params) analytic[name] = p.grads;

    for (auto& [name, p] : params) {
        const std::vector<T>& ga = analytic[name];
        for (size_t i = 0; i < p.size(); ++i) {
            const T saved = p.values[i];
            p.values[i] = saved + static_cast<T>(h);
            const double lp = loss_fn();
            p.values[i] = saved - static_cast<T>(h);
            const double lm = loss_fn();
            p.values[i] = saved;

            const double numeric = (lp - lm) / (2.0 * h);
            const double a = static_cast<double>(ga[i]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_name = name + "[" + std::to_string(i) + "]";
            }
            if (rel > tolerance)
                report.failures.push_back({name, i, a, numeric, rel});
        }
    }
    // restore analytic grads so callers can keep using them
    loss_fn();
    return report;
}

} // namespace veloattn
