#pragma once

// End-to-end encoder-decoder assembly: input MLP, encoder stages
// (block + downsample), decoder stages (upsample + block), and the
// two-layer segmentation head. Parameters live in a ParamStore; the
// structs here hold typed handles into it, so checkpointing and the
// optimizer see one flat name-to-tensor map.

#include <numeric>

#include <json.hpp>

#include "veloattn/common.hpp"
#include "veloattn/layers.hpp"
#include "veloattn/numerics.hpp"
#include "veloattn/scan.hpp"

namespace veloattn {

struct ModelConfig {
    std::vector<size_t> stage_channels = {32, 64, 128, 256, 512};
    size_t n_vtl = 16;  // attention neighborhood
    size_t n_tus = 12;  // upsampling neighborhood
    size_t k_ds = 16;   // downsampling group size
    size_t d_p = 8;     // upsampler position-encoding width
    size_t d_v = 4;     // upsampler velocity-encoding width
    size_t n_classes = 2;
    bool decoder_blocks = true; // attention block after each upsampler

    void validate() const {
        if (stage_channels.empty()) throw ConfigError("model: stage_channels is empty");
        for (size_t s = 0; s + 1 < stage_channels.size(); ++s)
            if (stage_channels[s + 1] <= stage_channels[s])
                throw ConfigError("model: stage_channels must be strictly increasing");
        for (size_t c : stage_channels)
            if (c == 0) throw ConfigError("model: zero-width stage");
        if (n_vtl < 1 || n_tus < 1 || k_ds < 1)
            throw ConfigError("model: neighborhood sizes must be >= 1");
        if (d_p < 1 || d_v < 1) throw ConfigError("model: encoding widths must be >= 1");
        if (n_classes < 2) throw ConfigError("model: need at least 2 classes");
    }

    size_t stages() const { return stage_channels.size(); }

    nlohmann::json to_json() const {
        return {{"stage_channels", stage_channels}, {"n_vtl", n_vtl},   {"n_tus", n_tus},
                {"k_ds", k_ds},                     {"d_p", d_p},       {"d_v", d_v},
                {"n_classes", n_classes},           {"decoder_blocks", decoder_blocks}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        try {
            c.stage_channels = j.at("stage_channels").get<std::vector<size_t>>();
            c.n_vtl = j.at("n_vtl").get<size_t>();
            c.n_tus = j.at("n_tus").get<size_t>();
            c.k_ds = j.at("k_ds").get<size_t>();
            c.d_p = j.at("d_p").get<size_t>();
            c.d_v = j.at("d_v").get<size_t>();
            c.n_classes = j.at("n_classes").get<size_t>();
            c.decoder_blocks = j.at("decoder_blocks").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("model config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

template <class T>
struct Model {
    ModelConfig config;
    ParamStore<T> params;

    // input MLP: linear -> LayerNorm -> GELU -> linear, 4 -> c0 -> c0
    Param<T>*in_w1 = nullptr, *in_b1 = nullptr, *in_gamma = nullptr, *in_beta = nullptr,
            *in_w2 = nullptr, *in_b2 = nullptr;
    std::vector<BlockParams<T>> enc_blocks; // one per stage
    std::vector<DownsampleParams<T>> downs; // downs[s] produces stage s+1
    std::vector<UpsampleParams<T>> ups;     // ups[s] maps stage s+1 onto skip s
    std::vector<BlockParams<T>> dec_blocks; // dec_blocks[s] runs at stage s width
    // head: linear -> GELU -> linear, c0 -> c0 -> n_classes
    Param<T>*head_w1 = nullptr, *head_b1 = nullptr, *head_w2 = nullptr, *head_b2 = nullptr;

    Model() = default;
    Model(const Model&) = delete;            // handles point into `params`
    Model& operator=(const Model&) = delete;
    Model(Model&&) noexcept = default;       // map nodes are stable under move
    Model& operator=(Model&&) noexcept = default;
};

namespace detail {

// Kaiming-uniform over fan-in (= first shape dimension).
template <class T>
void init_weight(Param<T>& p, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(p.dim(0)));
    for (auto& v : p.values) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
Param<T>* make_weight(ParamStore<T>& ps, const std::string& name, size_t in, size_t out, Rng& rng) {
    Param<T>& p = ps.create(name, {in, out});
    init_weight(p, rng);
    return &p;
}

template <class T>
Param<T>* make_bias(ParamStore<T>& ps, const std::string& name, size_t n) {
    return &ps.create(name, {n}); // zero-filled
}

template <class T>
Param<T>* make_ones(ParamStore<T>& ps, const std::string& name, size_t n) {
    Param<T>& p = ps.create(name, {n});
    std::fill(p.values.begin(), p.values.end(), T(1));
    return &p;
}

template <class T>
FcParams<T> make_fc(ParamStore<T>& ps, const std::string& prefix, size_t in, size_t out, Rng& rng) {
    FcParams<T> fc;
    fc.w = make_weight(ps, prefix + ".w", in, out, rng);
    fc.b = make_bias(ps, prefix + ".b", out);
    fc.gamma = make_ones(ps, prefix + ".gamma", out);
    fc.beta = make_bias(ps, prefix + ".beta", out);
    return fc;
}

template <class T>
EncodingMlp<T> make_mlp(ParamStore<T>& ps, const std::string& prefix, size_t in, size_t hidden,
                        size_t out, Rng& rng) {
    EncodingMlp<T> mlp;
    mlp.w1 = make_weight(ps, prefix + ".w1", in, hidden, rng);
    mlp.b1 = make_bias(ps, prefix + ".b1", hidden);
    mlp.w2 = make_weight(ps, prefix + ".w2", hidden, out, rng);
    mlp.b2 = make_bias(ps, prefix + ".b2", out);
    return mlp;
}

template <class T>
AttentionParams<T> make_attention(ParamStore<T>& ps, const std::string& prefix, size_t d, Rng& rng) {
    AttentionParams<T> a;
    a.wq = make_weight(ps, prefix + ".wq", d, d, rng);
    a.wk = make_weight(ps, prefix + ".wk", d, d, rng);
    a.wv = make_weight(ps, prefix + ".wv", d, d, rng);
    a.pos_enc = make_mlp(ps, prefix + ".pos", 2, d, d, rng);
    a.vel_enc = make_mlp(ps, prefix + ".vel", 1, d, d, rng);
    return a;
}

template <class T>
BlockParams<T> make_block(ParamStore<T>& ps, const std::string& prefix, size_t d, Rng& rng) {
    BlockParams<T> b;
    b.fc1 = make_fc(ps, prefix + ".fc1", d, d, rng);
    b.attn = make_attention(ps, prefix + ".attn", d, rng);
    b.fc2 = make_fc(ps, prefix + ".fc2", d, d, rng);
    return b;
}

} // namespace detail

template <class T>
Model<T> build_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    Model<T> m;
    m.config = config;
    Rng rng(seed);
    ParamStore<T>& ps = m.params;
    const auto& ch = config.stage_channels;
    const size_t S = config.stages(), c0 = ch[0];

    m.in_w1 = detail::make_weight(ps, "input.w1", 4, c0, rng);
    m.in_b1 = detail::make_bias(ps, "input.b1", c0);
    m.in_gamma = detail::make_ones(ps, "input.gamma", c0);
    m.in_beta = detail::make_bias(ps, "input.beta", c0);
    m.in_w2 = detail::make_weight(ps, "input.w2", c0, c0, rng);
    m.in_b2 = detail::make_bias(ps, "input.b2", c0);

    for (size_t s = 0; s < S; ++s)
        m.enc_blocks.push_back(detail::make_block(ps, "enc" + std::to_string(s), ch[s], rng));
    for (size_t s = 0; s + 1 < S; ++s) {
        DownsampleParams<T> d;
        const std::string prefix = "down" + std::to_string(s + 1);
        d.proj_w = detail::make_weight(ps, prefix + ".proj.w", ch[s], ch[s + 1], rng);
        d.proj_b = detail::make_bias(ps, prefix + ".proj.b", ch[s + 1]);
        d.fuse = detail::make_fc(ps, prefix + ".fuse", ch[s + 1] + 3, ch[s + 1], rng);
        m.downs.push_back(d);
    }
    for (size_t s = 0; s + 1 < S; ++s) {
        UpsampleParams<T> u;
        const std::string prefix = "up" + std::to_string(s + 1);
        u.wq = detail::make_weight(ps, prefix + ".wq", ch[s], ch[s], rng);
        u.wk = detail::make_weight(ps, prefix + ".wk", ch[s + 1], ch[s], rng);
        u.wv = detail::make_weight(ps, prefix + ".wv", ch[s + 1], ch[s], rng);
        u.pos_enc = detail::make_mlp(ps, prefix + ".pos", 2, config.d_p, config.d_p, rng);
        u.vel_enc = detail::make_mlp(ps, prefix + ".vel", 1, config.d_v, config.d_v, rng);
        u.wy = detail::make_weight(ps, prefix + ".wy", ch[s] + config.d_p + config.d_v, ch[s], rng);
        m.ups.push_back(u);
        if (config.decoder_blocks)
            m.dec_blocks.push_back(detail::make_block(ps, "dec" + std::to_string(s), ch[s], rng));
    }

    m.head_w1 = detail::make_weight(ps, "head.w1", c0, c0, rng);
    m.head_b1 = detail::make_bias(ps, "head.b1", c0);
    m.head_w2 = detail::make_weight(ps, "head.w2", c0, config.n_classes, rng);
    m.head_b2 = detail::make_bias(ps, "head.b2", config.n_classes);
    return m;
}

// ---------------------------------------------------------------------------
// Forward tape: every stage state and per-op cache needed by backward.
// Reused across calls to avoid reallocation in the training loop.
// ---------------------------------------------------------------------------

template <class T>
struct ForwardTape {
    // input MLP
    Matrix<T> raw;    // N x 4
    Matrix<T> in_h1;  // pre-norm
    Matrix<T> in_ln;  // post-norm, pre-GELU
    Matrix<T> in_act; // post-GELU
    LayerNormCache<T> in_lncache;

    std::vector<StageState<T>> states; // pre-block state per stage
    std::vector<Matrix<T>> skips;      // post-block features per stage
    std::vector<BlockCache<T>> enc_caches;
    std::vector<DownsampleCache<T>> down_caches;

    std::vector<Matrix<T>> up_outs; // upsampler output at stage s
    std::vector<UpsampleCache<T>> up_caches;
    std::vector<StageState<T>> dec_states; // decoder block input at stage s
    std::vector<BlockCache<T>> dec_caches;
    std::vector<Matrix<T>> dec_outs; // decoder features at stage s

    // head
    Matrix<T> head_h1;  // pre-GELU
    Matrix<T> head_act; // post-GELU
    Matrix<T> logits;   // N x n_classes
};

template <class T>
const Matrix<T>& forward(Model<T>& m, const RadarScan& scan, ForwardTape<T>& t) {
    scan.validate();
    const size_t n = scan.size(), S = m.config.stages();

    t.raw.resize(n, 4);
    for (size_t i = 0; i < n; ++i) {
        t.raw(i, 0) = static_cast<T>(scan.positions(i, 0));
        t.raw(i, 1) = static_cast<T>(scan.positions(i, 1));
        t.raw(i, 2) = static_cast<T>(scan.velocities[i]);
        t.raw(i, 3) = static_cast<T>(scan.rcs[i]);
    }
    linear_forward(t.raw, *m.in_w1, m.in_b1, t.in_h1);
    layer_norm_forward(t.in_h1, *m.in_gamma, *m.in_beta, t.in_ln, t.in_lncache);
    gelu_forward(t.in_ln, t.in_act);

    t.states.resize(S);
    t.skips.resize(S);
    t.enc_caches.resize(S);
    t.down_caches.resize(S > 0 ? S - 1 : 0);

    StageState<T>& s0 = t.states[0];
    linear_forward(t.in_act, *m.in_w2, m.in_b2, s0.features);
    s0.positions = scan.positions;
    s0.velocities = scan.velocities;
    s0.origin_indices.resize(n);
    std::iota(s0.origin_indices.begin(), s0.origin_indices.end(), 0);

    block_forward(t.states[0], m.enc_blocks[0], m.config.n_vtl, t.enc_caches[0], t.skips[0]);
    for (size_t s = 1; s < S; ++s) {
        StageState<T> pre = t.states[s - 1]; // geometry reused; features = block output
        pre.features = t.skips[s - 1];
        downsample_forward(pre, m.downs[s - 1], m.config.k_ds, t.down_caches[s - 1], t.states[s]);
        block_forward(t.states[s], m.enc_blocks[s], m.config.n_vtl, t.enc_caches[s], t.skips[s]);
    }

    t.up_outs.resize(S > 0 ? S - 1 : 0);
    t.up_caches.resize(S > 0 ? S - 1 : 0);
    t.dec_states.resize(S > 0 ? S - 1 : 0);
    t.dec_caches.resize(S > 0 ? S - 1 : 0);
    t.dec_outs.resize(S > 0 ? S - 1 : 0);

    const Matrix<T>* cur = &t.skips[S - 1];
    for (size_t s = S - 1; s >= 1; --s) {
        StageState<T> coarse = t.states[s];
        coarse.features = *cur;
        StageState<T> skip = t.states[s - 1];
        skip.features = t.skips[s - 1];
        upsample_forward(coarse, skip, m.ups[s - 1], m.config.n_tus, t.up_caches[s - 1],
                         t.up_outs[s - 1]);
        if (m.config.decoder_blocks) {
            t.dec_states[s - 1] = t.states[s - 1];
            t.dec_states[s - 1].features = t.up_outs[s - 1];
            block_forward(t.dec_states[s - 1], m.dec_blocks[s - 1], m.config.n_vtl,
                          t.dec_caches[s - 1], t.dec_outs[s - 1]);
            cur = &t.dec_outs[s - 1];
        } else {
            cur = &t.up_outs[s - 1];
        }
    }

    linear_forward(*cur, *m.head_w1, m.head_b1, t.head_h1);
    gelu_forward(t.head_h1, t.head_act);
    linear_forward(t.head_act, *m.head_w2, m.head_b2, t.logits);
    if (!all_finite(t.logits)) throw NumericError("forward: non-finite logits");
    return t.logits;
}

// Accumulates parameter gradients for one scan; pairs with the tape
// produced by the immediately preceding forward call.
template <class T>
void backward(Model<T>& m, ForwardTape<T>& t, const Matrix<T>& dlogits) {
    const size_t S = m.config.stages();
    const size_t n0 = t.states[0].size(), c0 = m.config.stage_channels[0];

    // head
    Matrix<T> dhead_act(n0, c0);
    dhead_act.fill(T(0));
    linear_backward(t.head_act, *m.head_w2, m.head_b2, dlogits, &dhead_act);
    Matrix<T> dcur(n0, c0);
    dcur.fill(T(0));
    gelu_backward(t.head_h1, dhead_act, dcur);
    {
        const Matrix<T>& head_in = (S == 1) ? t.skips[0]
                                 : (m.config.decoder_blocks ? t.dec_outs[0] : t.up_outs[0]);
        Matrix<T> dtmp(n0, c0);
        dtmp.fill(T(0));
        linear_backward(head_in, *m.head_w1, m.head_b1, dcur, &dtmp);
        dcur = std::move(dtmp);
    }

    // decoder, reverse of forward order (stage 0 upsampler ran last)
    std::vector<Matrix<T>> dskips(S);
    for (size_t s = 0; s < S; ++s) {
        dskips[s].resize(t.skips[s].rows(), t.skips[s].cols());
        dskips[s].fill(T(0));
    }
    for (size_t s = 1; s < S; ++s) {
        Matrix<T> dup(t.up_outs[s - 1].rows(), t.up_outs[s - 1].cols());
        dup.fill(T(0));
        if (m.config.decoder_blocks) {
            block_backward(t.dec_states[s - 1], m.dec_blocks[s - 1], t.dec_caches[s - 1], dcur, dup);
        } else {
            dup = dcur;
        }
        StageState<T> coarse = t.states[s];
        coarse.features = (s == S - 1) ? t.skips[s]
                         : (m.config.decoder_blocks ? t.dec_outs[s] : t.up_outs[s]);
        StageState<T> skip = t.states[s - 1];
        skip.features = t.skips[s - 1];
        Matrix<T> dcoarse(coarse.size(), coarse.width());
        dcoarse.fill(T(0));
        upsample_backward(coarse, skip, m.ups[s - 1], t.up_caches[s - 1], dup, dskips[s - 1],
                          dcoarse);
        dcur = std::move(dcoarse);
    }
    // dcur now holds d(skips[S-1])
    for (size_t i = 0; i < dcur.size(); ++i) dskips[S - 1].data()[i] += dcur.data()[i];

    // encoder, top stage down
    for (size_t s = S - 1; s >= 1; --s) {
        Matrix<T> dpre(t.states[s].size(), t.states[s].width());
        dpre.fill(T(0));
        block_backward(t.states[s], m.enc_blocks[s], t.enc_caches[s], dskips[s], dpre);
        StageState<T> below = t.states[s - 1];
        below.features = t.skips[s - 1];
        downsample_backward(below, m.downs[s - 1], t.down_caches[s - 1], dpre, dskips[s - 1]);
    }
    Matrix<T> dfeat0(n0, c0);
    dfeat0.fill(T(0));
    block_backward(t.states[0], m.enc_blocks[0], t.enc_caches[0], dskips[0], dfeat0);

    // input MLP
    Matrix<T> din_act(n0, c0);
    din_act.fill(T(0));
    linear_backward(t.in_act, *m.in_w2, m.in_b2, dfeat0, &din_act);
    Matrix<T> din_ln(n0, c0);
    din_ln.fill(T(0));
    gelu_backward(t.in_ln, din_act, din_ln);
    Matrix<T> din_h1(n0, c0);
    din_h1.fill(T(0));
    layer_norm_backward(din_ln, *m.in_gamma, *m.in_beta, t.in_lncache, din_h1);
    linear_backward(t.raw, *m.in_w1, m.in_b1, din_h1, nullptr);
}

template <class T>
std::vector<int32_t> predict(Model<T>& m, const RadarScan& scan, ForwardTape<T>& t) {
    const Matrix<T>& logits = forward(m, scan, t);
    std::vector<int32_t> labels(logits.rows());
    for (size_t i = 0; i < logits.rows(); ++i) {
        int32_t best = 0;
        for (size_t c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = static_cast<int32_t>(c); // ties keep 0
        labels[i] = best;
    }
    return labels;
}

} // namespace veloattn
