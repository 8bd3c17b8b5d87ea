// Training-harness coverage: pooled IoU bookkeeping, the velocity-threshold
// baseline against an exhaustive re-count, deterministic seeded training,
// evaluation plumbing, and the latency benchmark.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <veloattn/train.hpp>

using namespace veloattn;

namespace {

ModelConfig micro_config() {
    ModelConfig c;
    c.stage_channels = {3, 5};
    c.n_vtl = 3;
    c.n_tus = 2;
    c.k_ds = 3;
    c.d_p = 3;
    c.d_v = 2;
    return c;
}

SynthConfig small_synth() {
    SynthConfig c;
    c.n_static_min = 8;
    c.n_static_max = 12;
    c.n_clusters_min = 1;
    c.n_clusters_max = 2;
    c.points_per_cluster_min = 3;
    c.points_per_cluster_max = 5;
    c.rng_seed = 404;
    return c;
}

std::vector<RadarScan> small_split(size_t count, size_t offset = 0) {
    const SynthConfig cfg = small_synth();
    std::vector<RadarScan> scans;
    for (size_t i = 0; i < count; ++i) scans.push_back(synth_scene(cfg, offset + i));
    return scans;
}

// one-point-per-velocity scan with explicit labels
RadarScan velocity_scan(const std::vector<double>& velocities, const std::vector<int32_t>& labels,
                        const std::string& id) {
    RadarScan s;
    s.scan_id = id;
    const size_t n = velocities.size();
    s.positions.resize(n, 2);
    for (size_t i = 0; i < n; ++i) s.positions(i, 0) = static_cast<double>(i);
    s.velocities = velocities;
    s.rcs.assign(n, 1.0);
    s.labels = labels;
    return s;
}

} // namespace

// ---------------------------------------------------------------------------
// Confusion counts and IoU
// ---------------------------------------------------------------------------

TEST_CASE("iou over the moving class counts hits against all disagreements") {
    ConfusionCounts c;
    c.add({1, 0, 1, 0}, {1, 1, 0, 0});
    REQUIRE(c.tp == 1);
    REQUIRE(c.fn == 1);
    REQUIRE(c.fp == 1);
    REQUIRE(c.tn == 1);
    REQUIRE(c.total() == 4);
    REQUIRE(c.iou_moving() == Catch::Approx(1.0 / 3.0));
    REQUIRE(iou_moving({1, 0, 1, 0}, {1, 1, 0, 0}) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("iou with no moving points anywhere is perfect") {
    ConfusionCounts c;
    c.add({0, 0, 0}, {0, 0, 0});
    REQUIRE(c.iou_moving() == 1.0);
    REQUIRE(iou_moving({}, {}) == 1.0);
}

TEST_CASE("confusion counting rejects mismatched lengths") {
    ConfusionCounts c;
    REQUIRE_THROWS_AS(c.add({1, 0}, {1}), ArgumentError);
}

// ---------------------------------------------------------------------------
// Threshold baseline
// ---------------------------------------------------------------------------

TEST_CASE("threshold baseline labels strictly faster points as moving") {
    const RadarScan s = velocity_scan({0.0, 0.5, -2.0, 1.0, -1.0}, {0, 0, 1, 1, 1}, "v");
    REQUIRE(threshold_baseline(s, 1.0) == std::vector<int32_t>{0, 0, 1, 0, 0}); // 1.0 > 1.0 fails
    REQUIRE(threshold_baseline(s, 0.0) == std::vector<int32_t>{0, 1, 1, 1, 1});
    REQUIRE(threshold_baseline(s, 10.0) == std::vector<int32_t>{0, 0, 0, 0, 0});
    REQUIRE_THROWS_AS(threshold_baseline(s, -0.01), ArgumentError);
}

TEST_CASE("threshold tuning matches an exhaustive recount of the grid") {
    Rng rng(2024);
    std::vector<RadarScan> scans;
    for (int k = 0; k < 20; ++k) {
        const size_t n = static_cast<size_t>(rng.uniform_int(5, 40));
        std::vector<double> v(n);
        std::vector<int32_t> lab(n);
        for (size_t i = 0; i < n; ++i) {
            const bool moving = rng.uniform() < 0.3;
            // imperfectly separable: slow movers and drifting statics overlap
            v[i] = moving ? rng.uniform(0.2, 8.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0)
                          : rng.normal(0.0, 0.6);
            lab[i] = moving ? 1 : 0;
        }
        scans.push_back(velocity_scan(v, lab, "s" + std::to_string(k)));
    }

    const ThresholdCurve got = tune_threshold(scans);

    // recount from raw points, never through ConfusionCounts
    double best_iou = -1.0, best_t = 0.0;
    std::vector<double> reference_curve;
    for (int step = 0; step <= 1000; ++step) {
        const double t = static_cast<double>(step) / 100.0;
        long tp = 0, fp = 0, fn = 0;
        for (const RadarScan& s : scans)
            for (size_t i = 0; i < s.size(); ++i) {
                const bool pred = std::abs(s.velocities[i]) > t;
                const bool truth = s.labels[i] == 1;
                tp += pred && truth;
                fp += pred && !truth;
                fn += !pred && truth;
            }
        const double iou = (tp + fp + fn) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp + fn);
        reference_curve.push_back(iou);
        if (iou > best_iou) {
            best_iou = iou;
            best_t = t;
        }
    }

    REQUIRE(got.best_t == best_t);
    REQUIRE(got.best_iou == Catch::Approx(best_iou).margin(1e-15));
    REQUIRE(got.curve.size() == 1001);
    for (size_t i = 0; i < got.curve.size(); i += 37) {
        REQUIRE(got.curve[i].first == Catch::Approx(static_cast<double>(i) / 100.0));
        REQUIRE(got.curve[i].second == Catch::Approx(reference_curve[i]).margin(1e-15));
    }
}

TEST_CASE("threshold tuning picks the smallest perfect separator") {
    // statics drift at 0.005, slowest mover at 1.0: t=0.00 has false alarms,
    // t=0.01 is already perfect, so 0.01 must win as the smallest maximizer
    const RadarScan s =
        velocity_scan({0.005, -0.005, 1.0, -3.0}, {0, 0, 1, 1}, "sep");
    const ThresholdCurve curve = tune_threshold({s});
    REQUIRE(curve.best_t == 0.01);
    REQUIRE(curve.best_iou == 1.0);
}

TEST_CASE("threshold tuning on an all-static noiseless split settles at zero") {
    const RadarScan s = velocity_scan({0.0, 0.0, 0.0}, {0, 0, 0}, "still");
    const ThresholdCurve curve = tune_threshold({s});
    REQUIRE(curve.best_t == 0.0);
    REQUIRE(curve.best_iou == 1.0);
}

TEST_CASE("threshold tuning validates its split") {
    REQUIRE_THROWS_AS(tune_threshold({}), ArgumentError);
    RadarScan unlabeled = velocity_scan({1.0}, {1}, "u");
    unlabeled.labels.clear();
    REQUIRE_THROWS_AS(tune_threshold({unlabeled}), ArgumentError);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

TEST_CASE("evaluate pools counts over the split and times every scan") {
    Model<double> m = build_model<double>(micro_config(), 9);
    const std::vector<RadarScan> scans = small_split(3);
    size_t total_points = 0;
    for (const RadarScan& s : scans) total_points += s.size();

    const EvalReport report = evaluate(m, scans);
    REQUIRE(report.counts.total() == static_cast<int64_t>(total_points));
    REQUIRE(report.iou >= 0.0);
    REQUIRE(report.iou <= 1.0);
    REQUIRE(report.iou == report.counts.iou_moving());
    REQUIRE(report.latencies_s.size() == scans.size());
    for (double l : report.latencies_s) REQUIRE(l >= 0.0);

    const nlohmann::json j = report.to_json();
    REQUIRE(j.at("iou_moving").get<double>() == report.iou);
    REQUIRE(j.at("tp").get<int64_t>() == report.counts.tp);
    REQUIRE(j.at("scans").get<size_t>() == scans.size());
}

TEST_CASE("evaluate rejects empty and unlabeled splits") {
    Model<double> m = build_model<double>(micro_config(), 9);
    REQUIRE_THROWS_AS(evaluate(m, {}), ArgumentError);
    std::vector<RadarScan> scans = small_split(1);
    scans[0].labels.clear();
    REQUIRE_THROWS_AS(evaluate(m, scans), ArgumentError);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

TEST_CASE("training is deterministic for a fixed seed") {
    const std::vector<RadarScan> train_scans = small_split(4);
    const std::vector<RadarScan> val_scans = small_split(2, 100);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.rng_seed = 5;

    auto run = [&]() {
        Model<double> m = build_model<double>(micro_config(), 55);
        return train(m, train_scans, val_scans, cfg);
    };
    const TrainResult a = run();
    const TrainResult b = run();

    REQUIRE(a.epochs.size() == 3);
    REQUIRE(a.best_epoch == b.best_epoch);
    REQUIRE(a.best_val_iou == b.best_val_iou);
    for (size_t e = 0; e < a.epochs.size(); ++e) {
        REQUIRE(a.epochs[e].train_loss == b.epochs[e].train_loss); // bitwise
        REQUIRE(a.epochs[e].val_iou == b.epochs[e].val_iou);
        REQUIRE(a.epochs[e].lr == b.epochs[e].lr);
        REQUIRE(a.epochs[e].to_json().dump() == b.epochs[e].to_json().dump());
    }
}

TEST_CASE("training reduces the loss and returns the best-epoch weights") {
    const std::vector<RadarScan> train_scans = small_split(6);
    const std::vector<RadarScan> val_scans = small_split(2, 200);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 3;
    cfg.lr0 = 3e-3;
    cfg.augment = false; // keep the objective fixed across epochs
    cfg.rng_seed = 7;

    Model<double> m = build_model<double>(micro_config(), 3);
    const TrainResult result = train(m, train_scans, val_scans, cfg);

    REQUIRE(result.epochs.size() == 8);
    double min_loss = result.epochs[0].train_loss;
    for (const EpochMetrics& e : result.epochs) min_loss = std::min(min_loss, e.train_loss);
    REQUIRE(min_loss < result.epochs[0].train_loss);

    REQUIRE(result.best_epoch >= 0);
    REQUIRE(result.best_epoch < 8);
    REQUIRE(result.best_val_iou == result.epochs[result.best_epoch].val_iou);
    for (const EpochMetrics& e : result.epochs) REQUIRE(e.val_iou <= result.best_val_iou);

    // the model must carry the best epoch's weights out of the loop
    const EvalReport check = evaluate(m, val_scans);
    REQUIRE(check.iou == result.best_val_iou);

    // per-epoch lr follows the cosine schedule
    LrSchedule sched{cfg.lr0, cfg.epochs, 0.0};
    for (const EpochMetrics& e : result.epochs) REQUIRE(e.lr == cosine_lr(sched, e.epoch));
}

TEST_CASE("training validates configuration and splits") {
    const std::vector<RadarScan> scans = small_split(2);
    Model<double> m = build_model<double>(micro_config(), 1);

    TrainConfig bad;
    bad.epochs = 0;
    REQUIRE_THROWS_AS(train(m, scans, scans, bad), ConfigError);
    bad = TrainConfig{};
    bad.batch_size = 0;
    REQUIRE_THROWS_AS(train(m, scans, scans, bad), ConfigError);
    bad = TrainConfig{};
    bad.class_weights = {0.0, 8.0};
    REQUIRE_THROWS_AS(train(m, scans, scans, bad), ConfigError);
    bad = TrainConfig{};
    bad.lr0 = -1e-4;
    REQUIRE_THROWS_AS(train(m, scans, scans, bad), ConfigError);

    TrainConfig ok;
    ok.epochs = 1;
    REQUIRE_THROWS_AS(train(m, {}, scans, ok), ArgumentError);
    REQUIRE_THROWS_AS(train(m, scans, {}, ok), ArgumentError);
    std::vector<RadarScan> unlabeled = scans;
    unlabeled[0].labels.clear();
    REQUIRE_THROWS_AS(train(m, unlabeled, scans, ok), ArgumentError);
}

TEST_CASE("gradient scaling divides accumulated grads uniformly") {
    ParamStore<double> ps;
    Param<double>& p = ps.create("w", {2, 2});
    p.grads = {4.0, -2.0, 8.0, 0.5};
    ps.scale_grads(0.25);
    REQUIRE(p.grads == std::vector<double>{1.0, -0.5, 2.0, 0.125});
}

// ---------------------------------------------------------------------------
// Latency benchmark
// ---------------------------------------------------------------------------

TEST_CASE("latency benchmark reports ordered quantiles over all repetitions") {
    Model<double> m = build_model<double>(micro_config(), 12);
    const std::vector<RadarScan> scans = small_split(4);
    const LatencyStats stats = benchmark_latency(m, scans, 3);
    REQUIRE(stats.samples == 12);
    REQUIRE(stats.mean_s > 0.0);
    REQUIRE(stats.median_s > 0.0);
    REQUIRE(stats.p95_s >= stats.median_s);

    const nlohmann::json j = stats.to_json();
    REQUIRE(j.at("samples").get<size_t>() == 12);
    REQUIRE(j.at("mean_s").get<double>() == stats.mean_s);

    REQUIRE_THROWS_AS(benchmark_latency(m, {}, 1), ArgumentError);
    REQUIRE_THROWS_AS(benchmark_latency(m, scans, 0), ArgumentError);
}
