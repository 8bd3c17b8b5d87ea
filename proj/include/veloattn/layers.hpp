#pragma once

// Velocity-conditioned attention building blocks: relative position/velocity
// encodings, the per-channel neighborhood attention layer, its residual
// block, velocity-aware max-pool downsampling, and attention-based
// upsampling across resolutions.
//
// Conventions shared by every op here:
//   - flattened pair tensors are (n_queries * k_effective) x channels,
//     neighbor-major within each query, in canonical kNN order;
//   - raw attribute differences are neighbor minus query;
//   - geometry (positions, velocities) stays in double regardless of the
//     feature scalar T and carries no gradient;
//   - backward passes accumulate (+=) into caller-zeroed buffers.

#include "veloattn/common.hpp"
#include "veloattn/numerics.hpp"
#include "veloattn/sampling.hpp"

namespace veloattn {

// One resolution stage of the point cloud as it moves through the network.
template <class T>
struct StageState {
    Matrix<T> features;                  // N x D
    Matrix<double> positions;            // N x 2
    std::vector<double> velocities;      // N
    std::vector<int32_t> origin_indices; // N, into the stage-0 cloud

    size_t size() const { return features.rows(); }
    size_t width() const { return features.cols(); }
};

// ---------------------------------------------------------------------------
// Parameter handles. These are views into a ParamStore; ownership and
// checkpointing stay with the store.
// ---------------------------------------------------------------------------

template <class T>
struct EncodingMlp {
    Param<T>*w1 = nullptr, *b1 = nullptr, *w2 = nullptr, *b2 = nullptr;
    size_t out_dim() const { return w2->dim(1); }
};

template <class T>
struct AttentionParams {
    Param<T>*wq = nullptr, *wk = nullptr, *wv = nullptr; // D x D, no bias
    EncodingMlp<T> pos_enc;                              // 2 -> D
    EncodingMlp<T> vel_enc;                              // 1 -> D
};

// linear -> LayerNorm -> GELU
template <class T>
struct FcParams {
    Param<T>*w = nullptr, *b = nullptr, *gamma = nullptr, *beta = nullptr;
};

template <class T>
struct BlockParams {
    FcParams<T> fc1, fc2;
    AttentionParams<T> attn;
};

template <class T>
struct DownsampleParams {
    Param<T>*proj_w = nullptr, *proj_b = nullptr; // D_s -> D_{s+1}
    FcParams<T> fuse;                             // D_{s+1}+3 -> D_{s+1}
};

template <class T>
struct UpsampleParams {
    Param<T>*wq = nullptr;                // D x D on the skip features
    Param<T>*wk = nullptr, *wv = nullptr; // D_s x D on the coarse features
    EncodingMlp<T> pos_enc;               // 2 -> d_p
    EncodingMlp<T> vel_enc;               // 1 -> d_v
    Param<T>* wy = nullptr;               // (D+d_p+d_v) x D, no bias
};

// ---------------------------------------------------------------------------
// FC unit and encoding MLP, with caches for the backward pass.
// ---------------------------------------------------------------------------

template <class T>
struct FcCache {
    Matrix<T> h;      // linear output, pre-norm
    Matrix<T> ln_out; // post-norm, pre-GELU
    LayerNormCache<T> ln;
};

template <class T>
void fc_forward(const Matrix<T>& x, const FcParams<T>& p, FcCache<T>& c, Matrix<T>& y) {
    linear_forward(x, *p.w, p.b, c.h);
    layer_norm_forward(c.h, *p.gamma, *p.beta, c.ln_out, c.ln);
    gelu_forward(c.ln_out, y);
}

template <class T>
void fc_backward(const Matrix<T>& x, const FcParams<T>& p, const FcCache<T>& c, const Matrix<T>& dy,
                 Matrix<T>* dx) {
    Matrix<T> d_ln(dy.rows(), dy.cols());
    d_ln.fill(T(0));
    gelu_backward(c.ln_out, dy, d_ln);
    Matrix<T> dh(dy.rows(), dy.cols());
    dh.fill(T(0));
    layer_norm_backward(d_ln, *p.gamma, *p.beta, c.ln, dh);
    linear_backward(x, *p.w, p.b, dh, dx);
}

template <class T>
struct MlpCache {
    Matrix<T> in; // raw differences, cast to T
    Matrix<T> h1; // pre-GELU
    Matrix<T> a1; // post-GELU
};

// neighbor minus query attribute differences, flattened pair rows
inline Matrix<double> relative_diffs(const Matrix<double>& source_attrs,
                                     const Matrix<double>& query_attrs,
                                     const NeighborhoodIndex& nbr) {
    const size_t a = source_attrs.cols(), k = nbr.k_effective, m = nbr.n_queries;
    if (query_attrs.cols() != a)
        throw DimensionError("relative_diffs: attribute widths disagree");
    Matrix<double> out(m * k, a);
    for (size_t j = 0; j < m; ++j) {
        const double* qa = query_attrs.row(j);
        for (size_t i = 0; i < k; ++i) {
            const double* sa = source_attrs.row(static_cast<size_t>(nbr.at(j, i)));
            double* o = out.row(j * k + i);
            for (size_t c = 0; c < a; ++c) o[c] = sa[c] - qa[c];
        }
    }
    return out;
}

template <class T>
void encoding_forward(const Matrix<double>& diffs, const EncodingMlp<T>& mlp, MlpCache<T>& c,
                      Matrix<T>& out) {
    c.in = matrix_cast<T>(diffs);
    linear_forward(c.in, *mlp.w1, mlp.b1, c.h1);
    gelu_forward(c.h1, c.a1);
    linear_forward(c.a1, *mlp.w2, mlp.b2, out);
}

// Attribute differences carry no gradient, so this stops at the first linear.
template <class T>
void encoding_backward(const EncodingMlp<T>& mlp, const MlpCache<T>& c, const Matrix<T>& dout) {
    Matrix<T> da1(c.a1.rows(), c.a1.cols());
    da1.fill(T(0));
    linear_backward(c.a1, *mlp.w2, mlp.b2, dout, &da1);
    Matrix<T> dh1(c.h1.rows(), c.h1.cols());
    dh1.fill(T(0));
    gelu_backward(c.h1, da1, dh1);
    linear_backward(c.in, *mlp.w1, mlp.b1, dh1, nullptr);
}

inline Matrix<double> as_column(const std::vector<double>& v) {
    Matrix<double> m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.begin());
    return m;
}

// ---------------------------------------------------------------------------
// Velocity transformer layer. Per query j with neighbors i: logits
// (q_j - k_i) + delta_p + delta_v, softmaxed over neighbors independently per
// channel; values (v_i + delta_p + delta_v); output the attention-weighted
// channel-wise sum. No output projection.
// ---------------------------------------------------------------------------

template <class T>
struct VtlCache {
    NeighborhoodIndex nbr;
    Matrix<T> q, k, v;        // N x D projections
    Matrix<T> delta_p, delta_v; // (N*k) x D
    MlpCache<T> pos_mlp, vel_mlp;
    Matrix<T> attention;      // (N*k) x D, post-softmax
    Matrix<T> combined;       // (N*k) x D values
};

template <class T>
void vtl_forward(const Matrix<T>& x, const Matrix<double>& positions,
                 const std::vector<double>& velocities, const AttentionParams<T>& p, size_t n_vtl,
                 VtlCache<T>& c, Matrix<T>& y) {
    const size_t n = x.rows(), d = x.cols();
    linear_forward(x, *p.wq, nullptr, c.q);
    linear_forward(x, *p.wk, nullptr, c.k);
    linear_forward(x, *p.wv, nullptr, c.v);

    const Matrix<double> vel = as_column(velocities);
    c.nbr = knn(positions, positions, n_vtl, &vel);
    const size_t ke = c.nbr.k_effective;

    encoding_forward(relative_diffs(positions, positions, c.nbr), p.pos_enc, c.pos_mlp, c.delta_p);
    encoding_forward(relative_diffs(vel, vel, c.nbr), p.vel_enc, c.vel_mlp, c.delta_v);
    check_dims<T>("vtl", "delta_p.cols", c.delta_p.cols(), "feature width", d);
    check_dims<T>("vtl", "delta_v.cols", c.delta_v.cols(), "feature width", d);

    c.attention.resize(n * ke, d);
    c.combined.resize(n * ke, d);
    for (size_t j = 0; j < n; ++j) {
        const T* qj = c.q.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const size_t r = j * ke + i;
            const auto src = static_cast<size_t>(c.nbr.at(j, i));
            const T* ki = c.k.row(src);
            const T* vi = c.v.row(src);
            const T* dp = c.delta_p.row(r);
            const T* dv = c.delta_v.row(r);
            T* att = c.attention.row(r);
            T* cmb = c.combined.row(r);
            for (size_t ch = 0; ch < d; ++ch) {
                att[ch] = qj[ch] - ki[ch] + dp[ch] + dv[ch];
                cmb[ch] = vi[ch] + dp[ch] + dv[ch];
            }
        }
    }
    for (size_t j = 0; j < n; ++j)
        for (size_t ch = 0; ch < d; ++ch)
            softmax_strided(c.attention.data() + j * ke * d + ch, ke, d);

    y.resize(n, d);
    y.fill(T(0));
    for (size_t j = 0; j < n; ++j) {
        T* yj = y.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const size_t r = j * ke + i;
            const T* att = c.attention.row(r);
            const T* cmb = c.combined.row(r);
            for (size_t ch = 0; ch < d; ++ch) yj[ch] += att[ch] * cmb[ch];
        }
    }
}

template <class T>
void vtl_backward(const Matrix<T>& x, const AttentionParams<T>& p, const VtlCache<T>& c,
                  const Matrix<T>& dy, Matrix<T>& dx) {
    const size_t n = x.rows(), d = x.cols(), ke = c.nbr.k_effective;

    Matrix<T> datt(n * ke, d), dcmb(n * ke, d);
    for (size_t j = 0; j < n; ++j) {
        const T* dyj = dy.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const size_t r = j * ke + i;
            const T* att = c.attention.row(r);
            const T* cmb = c.combined.row(r);
            T* dar = datt.row(r);
            T* dcr = dcmb.row(r);
            for (size_t ch = 0; ch < d; ++ch) {
                dar[ch] = dyj[ch] * cmb[ch];
                dcr[ch] = dyj[ch] * att[ch];
            }
        }
    }

    Matrix<T> dlogits(n * ke, d);
    dlogits.fill(T(0));
    for (size_t j = 0; j < n; ++j)
        for (size_t ch = 0; ch < d; ++ch)
            softmax_backward_strided(c.attention.data() + j * ke * d + ch,
                                     datt.data() + j * ke * d + ch,
                                     dlogits.data() + j * ke * d + ch, ke, d);

    // delta_p and delta_v enter both the logits and the values
    Matrix<T> ddelta(n * ke, d);
    for (size_t r = 0; r < n * ke; ++r)
        for (size_t ch = 0; ch < d; ++ch) ddelta(r, ch) = dlogits(r, ch) + dcmb(r, ch);

    Matrix<T> dq(n, d), dk(n, d), dv(n, d);
    dq.fill(T(0));
    dk.fill(T(0));
    dv.fill(T(0));
    for (size_t j = 0; j < n; ++j) {
        T* dqj = dq.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const size_t r = j * ke + i;
            const auto src = static_cast<size_t>(c.nbr.at(j, i));
            const T* dlr = dlogits.row(r);
            const T* dcr = dcmb.row(r);
            T* dks = dk.row(src);
            T* dvs = dv.row(src);
            for (size_t ch = 0; ch < d; ++ch) {
                dqj[ch] += dlr[ch];
                dks[ch] -= dlr[ch];
                dvs[ch] += dcr[ch];
            }
        }
    }

    encoding_backward(p.pos_enc, c.pos_mlp, ddelta);
    encoding_backward(p.vel_enc, c.vel_mlp, ddelta);
    linear_backward(x, *p.wq, nullptr, dq, &dx);
    linear_backward(x, *p.wk, nullptr, dk, &dx);
    linear_backward(x, *p.wv, nullptr, dv, &dx);
}

// ---------------------------------------------------------------------------
// Residual block: x + FC2(VTL(FC1(x))). Positions and velocities pass
// through untouched.
// ---------------------------------------------------------------------------

template <class T>
struct BlockCache {
    FcCache<T> fc1, fc2;
    Matrix<T> u;        // FC1 output
    VtlCache<T> vtl;
    Matrix<T> attn_out; // VTL output
    Matrix<T> f;        // FC2 output
};

template <class T>
void block_forward(const StageState<T>& state, const BlockParams<T>& p, size_t n_vtl,
                   BlockCache<T>& c, Matrix<T>& out) {
    fc_forward(state.features, p.fc1, c.fc1, c.u);
    vtl_forward(c.u, state.positions, state.velocities, p.attn, n_vtl, c.vtl, c.attn_out);
    fc_forward(c.attn_out, p.fc2, c.fc2, c.f);
    const size_t n = state.size(), d = state.width();
    out.resize(n, d);
    for (size_t i = 0; i < n * d; ++i) out.data()[i] = state.features.data()[i] + c.f.data()[i];
}

template <class T>
void block_backward(const StageState<T>& state, const BlockParams<T>& p, const BlockCache<T>& c,
                    const Matrix<T>& dout, Matrix<T>& dx) {
    const size_t n = state.size(), d = state.width();
    for (size_t i = 0; i < n * d; ++i) dx.data()[i] += dout.data()[i]; // residual path

    Matrix<T> dattn(n, d);
    dattn.fill(T(0));
    fc_backward(c.attn_out, p.fc2, c.fc2, dout, &dattn);
    Matrix<T> du(n, d);
    du.fill(T(0));
    vtl_backward(c.u, p.attn, c.vtl, dattn, du);
    fc_backward(state.features, p.fc1, c.fc1, du, &dx);
}

// ---------------------------------------------------------------------------
// Downsampling: project features to the next width, pick ceil(N/2) centers by
// FPS, group k_ds neighbors, concatenate [features, rel pos, rel vel],
// channel-wise max pool, fuse through an FC. Centers keep their original
// position and velocity.
// ---------------------------------------------------------------------------

template <class T>
struct DownsampleCache {
    Matrix<T> projected; // N x E
    std::vector<int32_t> centers;
    NeighborhoodIndex nbr;
    Matrix<T> pooled;           // N' x (E+3)
    std::vector<size_t> argmax; // N' * (E+3), winning neighbor slot
    FcCache<T> fuse;
};

template <class T>
void downsample_forward(const StageState<T>& state, const DownsampleParams<T>& p, size_t k_ds,
                        DownsampleCache<T>& c, StageState<T>& out) {
    const size_t n = state.size();
    linear_forward(state.features, *p.proj_w, p.proj_b, c.projected);
    const size_t e = c.projected.cols();

    const size_t m = std::max<size_t>(1, (n + 1) / 2);
    c.centers = fps(state.positions, m);
    out.positions = take_rows(state.positions, c.centers);
    out.velocities = take(state.velocities, c.centers);
    out.origin_indices = take(state.origin_indices, c.centers);

    const Matrix<double> vel = as_column(state.velocities);
    c.nbr = knn(out.positions, state.positions, k_ds, &vel);
    const size_t ke = c.nbr.k_effective;

    c.pooled.resize(m, e + 3);
    c.argmax.assign(m * (e + 3), 0);
    for (size_t j = 0; j < m; ++j) {
        T* pj = c.pooled.row(j);
        size_t* aj = c.argmax.data() + j * (e + 3);
        for (size_t i = 0; i < ke; ++i) {
            const auto src = static_cast<size_t>(c.nbr.at(j, i));
            const T* pf = c.projected.row(src);
            T cand[3] = {
                static_cast<T>(state.positions(src, 0) - out.positions(j, 0)),
                static_cast<T>(state.positions(src, 1) - out.positions(j, 1)),
                static_cast<T>(state.velocities[src] - out.velocities[j]),
            };
            for (size_t ch = 0; ch < e + 3; ++ch) {
                const T val = ch < e ? pf[ch] : cand[ch - e];
                if (i == 0 || val > pj[ch]) { // first occurrence keeps ties
                    pj[ch] = val;
                    aj[ch] = i;
                }
            }
        }
    }

    fc_forward(c.pooled, p.fuse, c.fuse, out.features);
}

template <class T>
void downsample_backward(const StageState<T>& state, const DownsampleParams<T>& p,
                         const DownsampleCache<T>& c, const Matrix<T>& dout, Matrix<T>& dx) {
    const size_t n = state.size(), e = c.projected.cols(), m = c.pooled.rows();
    Matrix<T> dpooled(m, e + 3);
    dpooled.fill(T(0));
    fc_backward(c.pooled, p.fuse, c.fuse, dout, &dpooled);

    // route max-pool gradients back to the winning grouped point; the
    // relative-geometry channels carry no feature gradient
    Matrix<T> dproj(n, e);
    dproj.fill(T(0));
    for (size_t j = 0; j < m; ++j) {
        const size_t* aj = c.argmax.data() + j * (e + 3);
        for (size_t ch = 0; ch < e; ++ch) {
            const auto src = static_cast<size_t>(c.nbr.at(j, aj[ch]));
            dproj(src, ch) += dpooled(j, ch);
        }
    }
    linear_backward(state.features, *p.proj_w, p.proj_b, dproj, &dx);
}

// ---------------------------------------------------------------------------
// Transformer upsampling from a coarse stage onto its skip stage. Three
// independent per-channel softmaxes (feature relation, position encoding,
// velocity encoding) are concatenated, applied to concatenated values, and
// projected back to the skip width; output adds onto the skip features.
// ---------------------------------------------------------------------------

template <class T>
struct UpsampleCache {
    NeighborhoodIndex nbr;
    Matrix<T> q;              // M x D
    Matrix<T> k, v;           // N_s x D
    Matrix<T> delta_p, delta_v; // (M*k) x d_p / d_v
    MlpCache<T> pos_mlp, vel_mlp;
    Matrix<T> a_qk;           // (M*k) x D, post-softmax
    Matrix<T> a_p, a_v;       // post-softmax encodings
    Matrix<T> y;              // M x (D+d_p+d_v)
};

template <class T>
void upsample_forward(const StageState<T>& coarse, const StageState<T>& skip,
                      const UpsampleParams<T>& p, size_t n_tus, UpsampleCache<T>& c,
                      Matrix<T>& out) {
    if (coarse.size() > skip.size())
        throw ArgumentError("upsample: coarse cloud has more points than the skip cloud");
    const size_t m = skip.size(), d = skip.width();
    linear_forward(skip.features, *p.wq, nullptr, c.q);
    linear_forward(coarse.features, *p.wk, nullptr, c.k);
    linear_forward(coarse.features, *p.wv, nullptr, c.v);
    check_dims<T>("upsample", "k.cols", c.k.cols(), "skip width", d);

    const Matrix<double> cvel = as_column(coarse.velocities);
    const Matrix<double> svel = as_column(skip.velocities);
    c.nbr = knn(skip.positions, coarse.positions, n_tus, &cvel);
    const size_t ke = c.nbr.k_effective;

    encoding_forward(relative_diffs(coarse.positions, skip.positions, c.nbr), p.pos_enc, c.pos_mlp,
                     c.delta_p);
    encoding_forward(relative_diffs(cvel, svel, c.nbr), p.vel_enc, c.vel_mlp, c.delta_v);
    const size_t dp = c.delta_p.cols(), dv = c.delta_v.cols();

    c.a_qk.resize(m * ke, d);
    for (size_t j = 0; j < m; ++j) {
        const T* qj = c.q.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const auto src = static_cast<size_t>(c.nbr.at(j, i));
            const T* ki = c.k.row(src);
            T* a = c.a_qk.row(j * ke + i);
            for (size_t ch = 0; ch < d; ++ch) a[ch] = qj[ch] - ki[ch];
        }
    }
    c.a_p = c.delta_p;
    c.a_v = c.delta_v;
    for (size_t j = 0; j < m; ++j) {
        for (size_t ch = 0; ch < d; ++ch) softmax_strided(c.a_qk.data() + j * ke * d + ch, ke, d);
        for (size_t ch = 0; ch < dp; ++ch) softmax_strided(c.a_p.data() + j * ke * dp + ch, ke, dp);
        for (size_t ch = 0; ch < dv; ++ch) softmax_strided(c.a_v.data() + j * ke * dv + ch, ke, dv);
    }

    c.y.resize(m, d + dp + dv);
    c.y.fill(T(0));
    for (size_t j = 0; j < m; ++j) {
        T* yj = c.y.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const size_t r = j * ke + i;
            const auto src = static_cast<size_t>(c.nbr.at(j, i));
            const T* vi = c.v.row(src);
            const T* aq = c.a_qk.row(r);
            for (size_t ch = 0; ch < d; ++ch) yj[ch] += aq[ch] * vi[ch];
            const T* ap = c.a_p.row(r);
            const T* ep = c.delta_p.row(r);
            for (size_t ch = 0; ch < dp; ++ch) yj[d + ch] += ap[ch] * ep[ch];
            const T* av = c.a_v.row(r);
            const T* ev = c.delta_v.row(r);
            for (size_t ch = 0; ch < dv; ++ch) yj[d + dp + ch] += av[ch] * ev[ch];
        }
    }

    Matrix<T> z;
    linear_forward(c.y, *p.wy, nullptr, z);
    out.resize(m, d);
    for (size_t i = 0; i < m * d; ++i) out.data()[i] = skip.features.data()[i] + z.data()[i];
}

template <class T>
void upsample_backward(const StageState<T>& coarse, const StageState<T>& skip,
                       const UpsampleParams<T>& p, const UpsampleCache<T>& c, const Matrix<T>& dout,
                       Matrix<T>& dskip, Matrix<T>& dcoarse) {
    const size_t m = skip.size(), d = skip.width(), ke = c.nbr.k_effective;
    const size_t dp = c.delta_p.cols(), dv = c.delta_v.cols();
    const size_t ns = coarse.size();

    for (size_t i = 0; i < m * d; ++i) dskip.data()[i] += dout.data()[i]; // residual path

    Matrix<T> dy(m, d + dp + dv);
    dy.fill(T(0));
    linear_backward(c.y, *p.wy, nullptr, dout, &dy);

    Matrix<T> da_qk(m * ke, d), da_p(m * ke, dp), da_v(m * ke, dv);
    Matrix<T> ddelta_p(m * ke, dp), ddelta_v(m * ke, dv);
    ddelta_p.fill(T(0));
    ddelta_v.fill(T(0));
    Matrix<T> dvv(ns, d);
    dvv.fill(T(0));
    for (size_t j = 0; j < m; ++j) {
        const T* dyj = dy.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const size_t r = j * ke + i;
            const auto src = static_cast<size_t>(c.nbr.at(j, i));
            const T* vi = c.v.row(src);
            const T* aq = c.a_qk.row(r);
            T* dvs = dvv.row(src);
            T* daq = da_qk.row(r);
            for (size_t ch = 0; ch < d; ++ch) {
                daq[ch] = dyj[ch] * vi[ch];
                dvs[ch] += dyj[ch] * aq[ch];
            }
            const T* ap = c.a_p.row(r);
            const T* ep = c.delta_p.row(r);
            T* dap = da_p.row(r);
            T* dep = ddelta_p.row(r);
            for (size_t ch = 0; ch < dp; ++ch) {
                dap[ch] = dyj[d + ch] * ep[ch];
                dep[ch] += dyj[d + ch] * ap[ch]; // value branch
            }
            const T* av = c.a_v.row(r);
            const T* ev = c.delta_v.row(r);
            T* dav = da_v.row(r);
            T* dev = ddelta_v.row(r);
            for (size_t ch = 0; ch < dv; ++ch) {
                dav[ch] = dyj[d + dp + ch] * ev[ch];
                dev[ch] += dyj[d + dp + ch] * av[ch];
            }
        }
    }

    // softmax branches; the encoding softmaxes accumulate onto the value
    // branch already stored in ddelta_*
    Matrix<T> dlog_qk(m * ke, d);
    dlog_qk.fill(T(0));
    for (size_t j = 0; j < m; ++j) {
        for (size_t ch = 0; ch < d; ++ch)
            softmax_backward_strided(c.a_qk.data() + j * ke * d + ch, da_qk.data() + j * ke * d + ch,
                                     dlog_qk.data() + j * ke * d + ch, ke, d);
        for (size_t ch = 0; ch < dp; ++ch)
            softmax_backward_strided(c.a_p.data() + j * ke * dp + ch, da_p.data() + j * ke * dp + ch,
                                     ddelta_p.data() + j * ke * dp + ch, ke, dp);
        for (size_t ch = 0; ch < dv; ++ch)
            softmax_backward_strided(c.a_v.data() + j * ke * dv + ch, da_v.data() + j * ke * dv + ch,
                                     ddelta_v.data() + j * ke * dv + ch, ke, dv);
    }

    Matrix<T> dq(m, d), dk(ns, d);
    dq.fill(T(0));
    dk.fill(T(0));
    for (size_t j = 0; j < m; ++j) {
        T* dqj = dq.row(j);
        for (size_t i = 0; i < ke; ++i) {
            const size_t r = j * ke + i;
            const auto src = static_cast<size_t>(c.nbr.at(j, i));
            const T* dlr = dlog_qk.row(r);
            T* dks = dk.row(src);
            for (size_t ch = 0; ch < d; ++ch) {
                dqj[ch] += dlr[ch];
                dks[ch] -= dlr[ch];
            }
        }
    }

    encoding_backward(p.pos_enc, c.pos_mlp, ddelta_p);
    encoding_backward(p.vel_enc, c.vel_mlp, ddelta_v);
    linear_backward(skip.features, *p.wq, nullptr, dq, &dskip);
    linear_backward(coarse.features, *p.wk, nullptr, dk, &dcoarse);
    linear_backward(coarse.features, *p.wv, nullptr, dvv, &dcoarse);
}

} // namespace veloattn
