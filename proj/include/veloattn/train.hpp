#pragma once

// Training loop (gradient accumulation + AdamW + cosine schedule), pooled
// IoU evaluation, the velocity-threshold baseline, and latency benchmarking.

#include <chrono>

#include <json.hpp>

#include "veloattn/checkpoint.hpp"
#include "veloattn/losses.hpp"
#include "veloattn/network.hpp"
#include "veloattn/synth.hpp"

namespace veloattn {

struct TrainConfig {
    int epochs = 50;
    size_t batch_size = 16; // gradient-accumulation count
    double lr0 = 5e-4;
    double weight_decay = 0.01;
    std::array<double, 2> class_weights = {0.5, 8.0}; // static, moving
    double lambda_ce = 1.0;
    double lambda_lov = 1.0;
    bool augment = true;
    AugConfig aug;
    uint64_t rng_seed = 0;

    void validate() const {
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (class_weights[0] <= 0 || class_weights[1] <= 0)
            throw ConfigError("train: class weights must be positive");
        if (lr0 < 0 || weight_decay < 0) throw ConfigError("train: negative lr0/weight_decay");
    }
};

// ---------------------------------------------------------------------------
// IoU for the moving class, pooled over whatever the counts cover.
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;

    void add(const std::vector<int32_t>& pred, const std::vector<int32_t>& truth) {
        if (pred.size() != truth.size())
            throw ArgumentError("confusion: prediction/label length mismatch");
        for (size_t i = 0; i < pred.size(); ++i) {
            if (truth[i] == 1)
                (pred[i] == 1 ? tp : fn) += 1;
            else
                (pred[i] == 1 ? fp : tn) += 1;
        }
    }

    int64_t total() const { return tp + fp + fn + tn; }

    // empty moving class on both sides counts as a perfect match
    double iou_moving() const {
        const int64_t denom = tp + fn + fp;
        return denom == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(denom);
    }
};

inline double iou_moving(const std::vector<int32_t>& pred, const std::vector<int32_t>& truth) {
    ConfusionCounts c;
    c.add(pred, truth);
    return c.iou_moving();
}

// ---------------------------------------------------------------------------
// Velocity-threshold baseline.
// ---------------------------------------------------------------------------

inline std::vector<int32_t> threshold_baseline(const RadarScan& scan, double t) {
    if (t < 0) throw ArgumentError("threshold_baseline: negative threshold");
    std::vector<int32_t> labels(scan.size());
    for (size_t i = 0; i < scan.size(); ++i) labels[i] = std::abs(scan.velocities[i]) > t ? 1 : 0;
    return labels;
}

struct ThresholdCurve {
    double best_t = 0.0;
    double best_iou = 0.0;
    std::vector<std::pair<double, double>> curve; // (t, pooled IoU)
};

// Grid search over t in {0.00, 0.01, ..., 10.00}; smallest maximizer wins.
inline ThresholdCurve tune_threshold(const std::vector<RadarScan>& scans) {
    if (scans.empty()) throw ArgumentError("tune_threshold: empty split");
    for (const RadarScan& s : scans)
        if (!s.labeled()) throw ArgumentError("tune_threshold: unlabeled scan " + s.scan_id);

    ThresholdCurve out;
    out.best_iou = -1.0;
    for (int step = 0; step <= 1000; ++step) {
        const double t = static_cast<double>(step) / 100.0;
        ConfusionCounts counts;
        for (const RadarScan& s : scans) counts.add(threshold_baseline(s, t), s.labels);
        const double iou = counts.iou_moving();
        out.curve.emplace_back(t, iou);
        if (iou > out.best_iou) {
            out.best_iou = iou;
            out.best_t = t;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation: pooled confusion counts over a split plus per-scan forward
// latency.
// ---------------------------------------------------------------------------

struct EvalReport {
    double iou = 0.0;
    ConfusionCounts counts;
    std::vector<double> latencies_s;

    nlohmann::json to_json() const {
        return {{"iou_moving", iou},
                {"tp", counts.tp},
                {"fp", counts.fp},
                {"fn", counts.fn},
                {"tn", counts.tn},
                {"scans", latencies_s.size()}};
    }
};

template <class T>
EvalReport evaluate(Model<T>& model, const std::vector<RadarScan>& scans) {
    if (scans.empty()) throw ArgumentError("evaluate: empty split");
    EvalReport report;
    ForwardTape<T> tape;
    for (const RadarScan& scan : scans) {
        if (!scan.labeled()) throw ArgumentError("evaluate: unlabeled scan " + scan.scan_id);
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<int32_t> pred = predict(model, scan, tape);
        const auto t1 = std::chrono::steady_clock::now();
        report.latencies_s.push_back(std::chrono::duration<double>(t1 - t0).count());
        report.counts.add(pred, scan.labels);
    }
    report.iou = report.counts.iou_moving();
    return report;
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_iou = 0.0;

    nlohmann::json to_json() const {
        return {{"epoch", epoch}, {"lr", lr}, {"train_loss", train_loss}, {"val_iou", val_iou}};
    }
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
    double best_val_iou = 0.0;
    int best_epoch = -1;
};

namespace detail {

template <class T>
std::map<std::string, std::vector<T>> snapshot_values(const ParamStore<T>& params) {
    std::map<std::string, std::vector<T>> snap;
    for (const auto& [name, p] : params) snap[name] = p.values;
    return snap;
}

template <class T>
void restore_values(ParamStore<T>& params, const std::map<std::string, std::vector<T>>& snap) {
    for (auto& [name, p] : params) p.values = snap.at(name);
}

} // namespace detail

// Seeded, augmented gradient-accumulation training. The model ends up
// holding the parameters of the best validation epoch, not the last one.
template <class T>
TrainResult train(Model<T>& model, const std::vector<RadarScan>& train_scans,
                  const std::vector<RadarScan>& val_scans, const TrainConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    config.validate();
    if (train_scans.empty() || val_scans.empty())
        throw ArgumentError("train: train and val splits must be non-empty");
    for (const RadarScan& s : train_scans)
        if (!s.labeled()) throw ArgumentError("train: unlabeled scan " + s.scan_id);

    LrSchedule sched{config.lr0, config.epochs, 0.0};
    AdamW<T> opt(0.9, 0.999, 1e-8, config.weight_decay);
    Rng shuffle_rng(mix_seed(config.rng_seed, 1));
    Rng aug_rng(mix_seed(config.rng_seed, 2));
    ForwardTape<T> tape;

    std::vector<size_t> order(train_scans.size());
    std::iota(order.begin(), order.end(), size_t{0});

    TrainResult result;
    std::map<std::string, std::vector<T>> best_params;
    model.params.zero_grads();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = cosine_lr(sched, epoch);
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        size_t in_batch = 0;
        for (size_t pos = 0; pos < order.size(); ++pos) {
            const RadarScan& base = train_scans[order[pos]];
            RadarScan scan = config.augment ? augment(base, aug_rng, config.aug) : base;

            const Matrix<T>& logits = forward(model, scan, tape);
            const LossResult<T> loss = combined_loss(logits, scan.labels, config.class_weights,
                                                     config.lambda_ce, config.lambda_lov);
            if (!std::isfinite(loss.value))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", scan '" + base.scan_id + "'");
            loss_sum += loss.value;
            backward(model, tape, loss.dlogits);
            ++in_batch;

            if (in_batch == config.batch_size || pos + 1 == order.size()) {
                model.params.scale_grads(static_cast<T>(1.0 / static_cast<double>(in_batch)));
                opt.step(model.params, lr); // leaves grads zeroed
                in_batch = 0;
            }
        }

        const EvalReport val = evaluate(model, val_scans);
        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr;
        m.train_loss = loss_sum / static_cast<double>(train_scans.size());
        m.val_iou = val.iou;
        result.epochs.push_back(m);
        if (on_epoch) on_epoch(m);

        if (result.best_epoch < 0 || val.iou > result.best_val_iou) {
            result.best_val_iou = val.iou;
            result.best_epoch = epoch;
            best_params = detail::snapshot_values(model.params);
        }
    }

    detail::restore_values(model.params, best_params);
    return result;
}

// ---------------------------------------------------------------------------
// Latency benchmark: one untimed warm-up pass, then per-forward wall clock.
// ---------------------------------------------------------------------------

struct LatencyStats {
    double mean_s = 0.0;
    double median_s = 0.0;
    double p95_s = 0.0;
    size_t samples = 0;

    nlohmann::json to_json() const {
        return {{"mean_s", mean_s}, {"median_s", median_s}, {"p95_s", p95_s}, {"samples", samples}};
    }
};

template <class T>
LatencyStats benchmark_latency(Model<T>& model, const std::vector<RadarScan>& scans,
                               int repetitions = 1) {
    if (scans.empty()) throw ArgumentError("benchmark: no scans");
    if (repetitions < 1) throw ArgumentError("benchmark: repetitions must be >= 1");
    ForwardTape<T> tape;
    forward(model, scans.front(), tape); // warm-up, excluded

    std::vector<double> samples;
    samples.reserve(scans.size() * static_cast<size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
        for (const RadarScan& scan : scans) {
            const auto t0 = std::chrono::steady_clock::now();
            forward(model, scan, tape);
            const auto t1 = std::chrono::steady_clock::now();
            samples.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    }

    LatencyStats stats;
    stats.samples = samples.size();
    for (double s : samples) stats.mean_s += s;
    stats.mean_s /= static_cast<double>(samples.size());
    std::sort(samples.begin(), samples.end());
    const size_t n = samples.size();
    stats.median_s = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    const size_t p95_idx = std::min(n - 1, static_cast<size_t>(std::ceil(0.95 * n)) - 1);
    stats.p95_s = samples[p95_idx];
    return stats;
}

} // namespace veloattn
