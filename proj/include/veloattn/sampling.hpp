#pragma once

// Deterministic point sampling kernels: farthest point sampling, exact
// brute-force kNN, and gather/scatter grouping.
//
// Determinism contract: all selections break ties by lexicographic point
// attributes, never by memory order alone, so results are a function of the
// point *set*. Reductions that cross the point axis (the FPS centroid) run
// in canonical lexicographic order for the same reason. This is what makes
// the end-to-end network permutation-equivariant bit-for-bit.

#include <cstdint>
#include <numeric>

#include "veloattn/common.hpp"

namespace veloattn {

// Per-query ordered neighbor lists into a reference point set.
struct NeighborhoodIndex {
    size_t k_effective = 0;
    size_t n_queries = 0;
    std::vector<int32_t> indices; // n_queries * k_effective, row-major

    int32_t at(size_t query, size_t i) const { return indices[query * k_effective + i]; }
    const int32_t* row(size_t query) const { return indices.data() + query * k_effective; }
};

namespace detail {

inline double sq_dist2(const double* a, const double* b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

// (x, y, extra attrs..., index) lexicographic comparison between reference
// points; used only to break exact distance ties.
inline bool attr_less(const Matrix<double>& pos, const Matrix<double>* attrs, int32_t a, int32_t b) {
    const double* pa = pos.row(static_cast<size_t>(a));
    const double* pb = pos.row(static_cast<size_t>(b));
    if (pa[0] != pb[0]) return pa[0] < pb[0];
    if (pa[1] != pb[1]) return pa[1] < pb[1];
    if (attrs) {
        const double* aa = attrs->row(static_cast<size_t>(a));
        const double* ab = attrs->row(static_cast<size_t>(b));
        for (size_t c = 0; c < attrs->cols(); ++c)
            if (aa[c] != ab[c]) return aa[c] < ab[c];
    }
    return a < b;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Farthest point sampling. Greedy max-min selection over Euclidean distance.
// Seed = point farthest from the centroid; ties fall back to the smaller
// (x, y) and finally the smaller index. Output is in selection order.
// ---------------------------------------------------------------------------

inline std::vector<int32_t> fps(const Matrix<double>& positions, size_t m) {
    const size_t n = positions.rows();
    if (n == 0) throw ArgumentError("fps: empty point set");
    if (m < 1 || m > n)
        throw ArgumentError("fps: m=" + std::to_string(m) + " outside [1, " + std::to_string(n) + "]");

    // Canonical-order centroid: summation order independent of input order.
    std::vector<int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        return detail::attr_less(positions, nullptr, a, b);
    });
    double cx = 0.0, cy = 0.0;
    for (int32_t i : order) {
        cx += positions(static_cast<size_t>(i), 0);
        cy += positions(static_cast<size_t>(i), 1);
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    const double centroid[2] = {cx, cy};

    std::vector<char> selected(n, 0);
    // Seed round scores by centroid distance; afterwards min_d2 tracks the
    // distance to the selected set only.
    std::vector<double> min_d2(n);
    for (size_t i = 0; i < n; ++i) min_d2[i] = detail::sq_dist2(positions.row(i), centroid);

    auto pick_max = [&]() {
        int32_t best = -1;
        double best_d = -1.0;
        for (size_t i = 0; i < n; ++i) {
            if (selected[i]) continue;
            const int32_t ii = static_cast<int32_t>(i);
            if (min_d2[i] > best_d ||
                (min_d2[i] == best_d && detail::attr_less(positions, nullptr, ii, best))) {
                best = ii;
                best_d = min_d2[i];
            }
        }
        return best;
    };

    std::vector<int32_t> out;
    out.reserve(m);
    for (size_t s = 0; s < m; ++s) {
        const int32_t next = pick_max();
        out.push_back(next);
        selected[static_cast<size_t>(next)] = 1;
        const double* pn = positions.row(static_cast<size_t>(next));
        for (size_t i = 0; i < n; ++i) {
            const double d2 = detail::sq_dist2(positions.row(i), pn);
            min_d2[i] = (s == 0) ? d2 : std::min(min_d2[i], d2);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact kNN. Neighbors ordered by (distance, x, y, tie_attrs..., index);
// tie_attrs optionally carries further per-reference attributes (velocity,
// rcs) so duplicate coordinates still order deterministically.
// k_effective = min(k, n_refs); a query that appears in the reference set
// is its own first neighbor.
// ---------------------------------------------------------------------------

inline NeighborhoodIndex knn(const Matrix<double>& queries, const Matrix<double>& refs, size_t k,
                             const Matrix<double>* tie_attrs = nullptr) {
    const size_t m = queries.rows(), n = refs.rows();
    if (n == 0) throw ArgumentError("knn: empty reference set");
    if (k < 1) throw ArgumentError("knn: k must be >= 1");
    if (tie_attrs && tie_attrs->rows() != n)
        throw DimensionError("knn: tie_attrs rows do not match reference count");

    NeighborhoodIndex out;
    out.k_effective = std::min(k, n);
    out.n_queries = m;
    out.indices.resize(m * out.k_effective);

    std::vector<double> d2(n);
    std::vector<int32_t> idx(n);
    for (size_t q = 0; q < m; ++q) {
        const double* pq = queries.row(q);
        for (size_t i = 0; i < n; ++i) d2[i] = detail::sq_dist2(refs.row(i), pq);
        std::iota(idx.begin(), idx.end(), 0);
        auto less = [&](int32_t a, int32_t b) {
            const double da = d2[static_cast<size_t>(a)];
            const double db = d2[static_cast<size_t>(b)];
            if (da != db) return da < db;
            return detail::attr_less(refs, tie_attrs, a, b);
        };
        std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(out.k_effective), idx.end(),
                          less);
        std::copy(idx.begin(), idx.begin() + static_cast<long>(out.k_effective),
                  out.indices.begin() + static_cast<long>(q * out.k_effective));
    }
    return out;
}

// ---------------------------------------------------------------------------
// group: out[q][i] = source[nbr[q][i]]. Backward scatters additively.
// ---------------------------------------------------------------------------

template <class T>
Matrix<T> group(const Matrix<T>& source, const NeighborhoodIndex& nbr) {
    Matrix<T> out(nbr.n_queries * nbr.k_effective, source.cols());
    for (size_t q = 0; q < nbr.n_queries; ++q) {
        for (size_t i = 0; i < nbr.k_effective; ++i) {
            const int32_t src = nbr.at(q, i);
            if (src < 0 || static_cast<size_t>(src) >= source.rows())
                throw NumericError("group: neighbor index out of range");
            const T* s = source.row(static_cast<size_t>(src));
            T* d = out.row(q * nbr.k_effective + i);
            std::copy(s, s + source.cols(), d);
        }
    }
    return out;
}

template <class T>
void group_backward(const Matrix<T>& d_out, const NeighborhoodIndex& nbr, Matrix<T>& d_source) {
    for (size_t q = 0; q < nbr.n_queries; ++q) {
        for (size_t i = 0; i < nbr.k_effective; ++i) {
            const size_t src = static_cast<size_t>(nbr.at(q, i));
            const T* d = d_out.row(q * nbr.k_effective + i);
            T* s = d_source.row(src);
            for (size_t c = 0; c < d_out.cols(); ++c) s[c] += d[c];
        }
    }
}

// Gathers rows of a double matrix (positions) by plain index list.
inline Matrix<double> take_rows(const Matrix<double>& source, const std::vector<int32_t>& idx) {
    Matrix<double> out(idx.size(), source.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
        const double* s = source.row(static_cast<size_t>(idx[r]));
        std::copy(s, s + source.cols(), out.row(r));
    }
    return out;
}

template <class V>
V take(const V& source, const std::vector<int32_t>& idx) {
    V out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out[i] = source[static_cast<size_t>(idx[i])];
    return out;
}

} // namespace veloattn
