#pragma once

// Synthetic radar scene generator and training-time augmentation.
//
// A scene is static background + compact moving clusters + clutter, in that
// concatenation order. Moving points carry the radial component of their
// cluster's velocity vector as seen from the sensor origin, so the Doppler
// reading is |speed| * |cos(aspect angle)|. Clutter points are static but
// draw their velocity from a heavy-tailed Student-t, which produces the
// above-threshold false positives that defeat plain velocity thresholding.

#include <functional>
#include <numeric>

#include "veloattn/common.hpp"
#include "veloattn/scan.hpp"

namespace veloattn {

struct SynthConfig {
    int n_static_min = 60, n_static_max = 120;
    int n_clusters_min = 1, n_clusters_max = 4;
    int points_per_cluster_min = 6, points_per_cluster_max = 14;
    double cluster_speed_min = 0.3, cluster_speed_max = 6.0;
    double noise_sigma_pos = 0.5; // cluster blob spread, meters
    double noise_sigma_vel = 0.2; // Doppler noise, m/s
    double clutter_fraction = 0.15;
    double field_extent = 40.0; // half-width of the square field, meters
    uint64_t rng_seed = 0;

    void validate() const {
        if (n_static_min < 0 || n_static_max < n_static_min)
            throw ConfigError("synth: bad n_static range");
        if (n_clusters_min < 0 || n_clusters_max < n_clusters_min)
            throw ConfigError("synth: bad n_clusters range");
        if (points_per_cluster_min < 1 || points_per_cluster_max < points_per_cluster_min)
            throw ConfigError("synth: bad points_per_cluster range");
        if (cluster_speed_max < cluster_speed_min) throw ConfigError("synth: bad cluster_speed range");
        if (noise_sigma_pos < 0 || noise_sigma_vel < 0) throw ConfigError("synth: negative sigma");
        if (clutter_fraction < 0 || clutter_fraction > 1)
            throw ConfigError("synth: clutter_fraction outside [0,1]");
        if (field_extent <= 0) throw ConfigError("synth: field_extent must be positive");
        if (n_static_max == 0 && n_clusters_max == 0) throw ConfigError("synth: empty scene");
    }
};

// Clutter velocity model: Student-t, heavy enough that a fixed threshold
// always passes some static returns.
inline constexpr int kClutterTDof = 2;
inline constexpr double kClutterTScale = 1.5;

inline RadarScan synth_scene(const SynthConfig& cfg, Rng& rng) {
    cfg.validate();

    struct Point {
        double x, y, v, rcs;
        int label;
    };
    std::vector<Point> pts;

    const double ext = cfg.field_extent;
    const int n_static = static_cast<int>(rng.uniform_int(cfg.n_static_min, cfg.n_static_max));
    for (int i = 0; i < n_static; ++i) {
        Point p{};
        p.x = rng.uniform(-ext, ext);
        p.y = rng.uniform(-ext, ext);
        p.v = rng.normal(0.0, cfg.noise_sigma_vel);
        p.rcs = rng.uniform(-25.0, 5.0);
        p.label = 0;
        pts.push_back(p);
    }

    const int n_clusters = static_cast<int>(rng.uniform_int(cfg.n_clusters_min, cfg.n_clusters_max));
    for (int c = 0; c < n_clusters; ++c) {
        double cx, cy;
        do {
            cx = rng.uniform(-ext, ext);
            cy = rng.uniform(-ext, ext);
        } while (cx * cx + cy * cy < 0.0025 * ext * ext); // keep clusters off the sensor origin
        const double speed = rng.uniform(cfg.cluster_speed_min, cfg.cluster_speed_max);
        const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double wx = speed * std::cos(heading), wy = speed * std::sin(heading);
        const int n_pts =
            static_cast<int>(rng.uniform_int(cfg.points_per_cluster_min, cfg.points_per_cluster_max));
        for (int i = 0; i < n_pts; ++i) {
            Point p{};
            p.x = cx + rng.normal(0.0, cfg.noise_sigma_pos);
            p.y = cy + rng.normal(0.0, cfg.noise_sigma_pos);
            const double r = std::sqrt(p.x * p.x + p.y * p.y);
            const double ux = r > 1e-12 ? p.x / r : 1.0;
            const double uy = r > 1e-12 ? p.y / r : 0.0;
            p.v = wx * ux + wy * uy + rng.normal(0.0, cfg.noise_sigma_vel);
            p.rcs = rng.uniform(-10.0, 15.0);
            p.label = 1;
            pts.push_back(p);
        }
    }

    const int n_clutter =
        static_cast<int>(std::llround(cfg.clutter_fraction * static_cast<double>(pts.size())));
    for (int i = 0; i < n_clutter; ++i) {
        Point p{};
        p.x = rng.uniform(-ext, ext);
        p.y = rng.uniform(-ext, ext);
        p.v = rng.student_t(kClutterTDof, kClutterTScale);
        p.rcs = rng.uniform(-25.0, 5.0);
        p.label = 0;
        pts.push_back(p);
    }

    RadarScan scan;
    scan.positions.resize(pts.size(), 2);
    scan.velocities.resize(pts.size());
    scan.rcs.resize(pts.size());
    scan.labels.resize(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        scan.positions(i, 0) = pts[i].x;
        scan.positions(i, 1) = pts[i].y;
        scan.velocities[i] = pts[i].v;
        scan.rcs[i] = pts[i].rcs;
        scan.labels[i] = pts[i].label;
    }
    scan.validate();
    return scan;
}

inline RadarScan synth_scene(const SynthConfig& cfg, uint64_t scan_index) {
    Rng rng(mix_seed(cfg.rng_seed, scan_index));
    return synth_scene(cfg, rng);
}

// ---------------------------------------------------------------------------
// Augmentation: jitter, scale, rotate, instance copy, each applied with its
// own probability, in that fixed order. Doppler velocity is a radial scalar
// and is invariant under scene rotation/scale about the origin, so only
// positions transform.
// ---------------------------------------------------------------------------

struct AugConfig {
    double p_jitter = 0.5;
    double sigma_jitter = 0.1; // meters per coordinate
    double p_scale = 0.5;
    double scale_min = 0.95, scale_max = 1.05;
    double p_rotate = 0.5;
    double p_instance = 0.5;
    double link_radius = 2.0; // single-linkage radius for moving clusters
};

namespace detail {

// Connected components of the moving points under single linkage.
inline std::vector<std::vector<size_t>> moving_components(const RadarScan& scan, double radius) {
    std::vector<size_t> moving;
    for (size_t i = 0; i < scan.size(); ++i)
        if (scan.labels[i] == 1) moving.push_back(i);

    std::vector<size_t> parent(moving.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<size_t(size_t)> find = [&](size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    const double r2 = radius * radius;
    for (size_t a = 0; a < moving.size(); ++a) {
        for (size_t b = a + 1; b < moving.size(); ++b) {
            const double dx = scan.positions(moving[a], 0) - scan.positions(moving[b], 0);
            const double dy = scan.positions(moving[a], 1) - scan.positions(moving[b], 1);
            if (dx * dx + dy * dy <= r2) parent[find(a)] = find(b);
        }
    }
    std::map<size_t, std::vector<size_t>> groups;
    for (size_t a = 0; a < moving.size(); ++a) groups[find(a)].push_back(moving[a]);
    std::vector<std::vector<size_t>> out;
    for (auto& [_, g] : groups) out.push_back(std::move(g));
    return out;
}

} // namespace detail

inline RadarScan augment(const RadarScan& in, Rng& rng, const AugConfig& cfg) {
    if (!in.labeled()) throw ArgumentError("augment: scan must be labeled");
    RadarScan scan = in;

    if (rng.uniform() < cfg.p_jitter) {
        for (size_t i = 0; i < scan.size(); ++i) {
            scan.positions(i, 0) += rng.normal(0.0, cfg.sigma_jitter);
            scan.positions(i, 1) += rng.normal(0.0, cfg.sigma_jitter);
        }
    }

    if (rng.uniform() < cfg.p_scale) {
        const double s = rng.uniform(cfg.scale_min, cfg.scale_max);
        for (size_t i = 0; i < scan.size(); ++i) {
            scan.positions(i, 0) *= s;
            scan.positions(i, 1) *= s;
        }
    }

    if (rng.uniform() < cfg.p_rotate) {
        const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double c = std::cos(yaw), s = std::sin(yaw);
        for (size_t i = 0; i < scan.size(); ++i) {
            const double x = scan.positions(i, 0), y = scan.positions(i, 1);
            scan.positions(i, 0) = c * x - s * y;
            scan.positions(i, 1) = s * x + c * y;
        }
    }

    if (rng.uniform() < cfg.p_instance) {
        const auto components = detail::moving_components(scan, cfg.link_radius);
        if (!components.empty()) {
            const auto& comp = components[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(components.size()) - 1))];
            const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double c = std::cos(yaw), s = std::sin(yaw);
            const size_t old_n = scan.size();
            Matrix<double> positions(old_n + comp.size(), 2);
            std::copy(scan.positions.begin(), scan.positions.end(), positions.begin());
            for (size_t j = 0; j < comp.size(); ++j) {
                const double x = scan.positions(comp[j], 0), y = scan.positions(comp[j], 1);
                positions(old_n + j, 0) = c * x - s * y;
                positions(old_n + j, 1) = s * x + c * y;
                scan.velocities.push_back(scan.velocities[comp[j]]);
                scan.rcs.push_back(scan.rcs[comp[j]]);
                scan.labels.push_back(1);
            }
            scan.positions = std::move(positions);
        }
    }

    return scan;
}

} // namespace veloattn
