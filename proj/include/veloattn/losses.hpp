#pragma once

// Segmentation losses on raw logits: weighted cross-entropy and the
// Lovász-Softmax surrogate for the Jaccard index. Both return the loss value
// together with d(loss)/d(logits) so callers never re-derive the softmax.

#include <array>
#include <numeric>

#include "veloattn/common.hpp"

namespace veloattn {

template <typename T>
struct LossResult {
    double value = 0.0;
    Matrix<T> dlogits; // same shape as the input logits
};

namespace detail {

// Row-wise softmax probabilities in double, max-subtracted.
template <typename T>
inline Matrix<double> row_softmax(const Matrix<T>& logits) {
    Matrix<double> p(logits.rows(), logits.cols());
    for (size_t i = 0; i < logits.rows(); ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < logits.cols(); ++c) m = std::max(m, static_cast<double>(logits(i, c)));
        double z = 0.0;
        for (size_t c = 0; c < logits.cols(); ++c) {
            p(i, c) = std::exp(static_cast<double>(logits(i, c)) - m);
            z += p(i, c);
        }
        for (size_t c = 0; c < logits.cols(); ++c) p(i, c) /= z;
    }
    return p;
}

inline void check_labels(size_t rows, size_t n_classes, const std::vector<int32_t>& labels) {
    if (labels.size() != rows)
        throw ArgumentError("loss: labels length " + std::to_string(labels.size()) +
                            " does not match logits rows " + std::to_string(rows));
    for (int32_t y : labels)
        if (y < 0 || static_cast<size_t>(y) >= n_classes)
            throw ArgumentError("loss: label " + std::to_string(y) + " outside class range");
}

} // namespace detail

// Weighted mean of per-point cross-entropy; normalizing by the weight sum
// keeps the magnitude independent of the class mix.
template <typename T>
inline LossResult<T> weighted_cross_entropy(const Matrix<T>& logits, const std::vector<int32_t>& labels,
                                            const std::array<double, 2>& class_weights) {
    detail::check_labels(logits.rows(), logits.cols(), labels);
    if (logits.cols() != 2) throw ArgumentError("weighted_cross_entropy: expected 2 logit columns");
    if (class_weights[0] <= 0 || class_weights[1] <= 0)
        throw ArgumentError("weighted_cross_entropy: class weights must be positive");

    const size_t n = logits.rows();
    LossResult<T> out;
    out.dlogits.resize(n, logits.cols());
    out.dlogits.fill(T(0));

    const Matrix<double> p = detail::row_softmax(logits);
    double weight_sum = 0.0;
    for (size_t i = 0; i < n; ++i) weight_sum += class_weights[static_cast<size_t>(labels[i])];

    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const auto y = static_cast<size_t>(labels[i]);
        const double w = class_weights[y];
        // log softmax recomputed max-subtracted for the picked class
        double m = std::max(static_cast<double>(logits(i, 0)), static_cast<double>(logits(i, 1)));
        double lse = 0.0;
        for (size_t c = 0; c < 2; ++c) lse += std::exp(static_cast<double>(logits(i, c)) - m);
        const double logp = static_cast<double>(logits(i, y)) - m - std::log(lse);
        acc += w * -logp;
        for (size_t c = 0; c < 2; ++c)
            out.dlogits(i, c) = static_cast<T>(w * (p(i, c) - (c == y ? 1.0 : 0.0)) / weight_sum);
    }
    out.value = acc / weight_sum;
    return out;
}

// Lovász-Softmax. Per class present in the labels: sort that class's
// prediction errors descending, dot with the discrete gradient of the
// Jaccard-index Lovász extension, then average over present classes. The
// backward pass holds the sort (and hence the gradient vector) fixed, which
// is the standard subgradient of this piecewise-linear surrogate.
template <typename T>
inline LossResult<T> lovasz_loss(const Matrix<T>& logits, const std::vector<int32_t>& labels) {
    detail::check_labels(logits.rows(), logits.cols(), labels);
    const size_t n = logits.rows(), n_classes = logits.cols();

    LossResult<T> out;
    out.dlogits.resize(n, n_classes);
    out.dlogits.fill(T(0));

    const Matrix<double> p = detail::row_softmax(logits);
    Matrix<double> dp(n, n_classes);
    dp.fill(0.0);

    std::vector<size_t> present;
    for (size_t c = 0; c < n_classes; ++c)
        if (std::any_of(labels.begin(), labels.end(),
                        [&](int32_t y) { return static_cast<size_t>(y) == c; }))
            present.push_back(c);
    if (present.empty()) return out; // unreachable for validated labels, kept defensive

    double acc = 0.0;
    std::vector<double> errors(n), grad(n);
    std::vector<size_t> order(n);
    for (size_t c : present) {
        for (size_t i = 0; i < n; ++i)
            errors[i] = static_cast<size_t>(labels[i]) == c ? 1.0 - p(i, c) : p(i, c);
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (errors[a] != errors[b]) return errors[a] > errors[b];
            return a < b;
        });

        // Jaccard extension gradient along the sorted prefix.
        size_t gts = 0;
        for (int32_t y : labels) gts += static_cast<size_t>(y) == c;
        double inter = static_cast<double>(gts), uni = static_cast<double>(gts);
        double prev_jac = 0.0;
        for (size_t j = 0; j < n; ++j) {
            const bool hit = static_cast<size_t>(labels[order[j]]) == c;
            inter -= hit ? 1.0 : 0.0;
            uni += hit ? 0.0 : 1.0;
            const double jac = 1.0 - inter / uni;
            grad[j] = jac - prev_jac;
            prev_jac = jac;
        }

        double loss_c = 0.0;
        for (size_t j = 0; j < n; ++j) {
            loss_c += errors[order[j]] * grad[j];
            const double de = grad[j] / static_cast<double>(present.size());
            dp(order[j], c) += static_cast<size_t>(labels[order[j]]) == c ? -de : de;
        }
        acc += loss_c;
    }
    out.value = acc / static_cast<double>(present.size());

    // chain dp through the row softmax
    for (size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (size_t c = 0; c < n_classes; ++c) dot += dp(i, c) * p(i, c);
        for (size_t c = 0; c < n_classes; ++c)
            out.dlogits(i, c) = static_cast<T>(p(i, c) * (dp(i, c) - dot));
    }
    return out;
}

template <typename T>
inline LossResult<T> combined_loss(const Matrix<T>& logits, const std::vector<int32_t>& labels,
                                   const std::array<double, 2>& class_weights, double lambda_ce,
                                   double lambda_lov) {
    LossResult<T> ce = weighted_cross_entropy(logits, labels, class_weights);
    LossResult<T> lov = lovasz_loss(logits, labels);
    LossResult<T> out;
    out.value = lambda_ce * ce.value + lambda_lov * lov.value;
    out.dlogits.resize(logits.rows(), logits.cols());
    for (size_t i = 0; i < out.dlogits.size(); ++i)
        out.dlogits.data()[i] = static_cast<T>(lambda_ce * static_cast<double>(ce.dlogits.data()[i]) +
                                               lambda_lov * static_cast<double>(lov.dlogits.data()[i]));
    return out;
}

} // namespace veloattn
