// Scan container, CSV round trip, multi-sensor merge, dataset splits, and
// the synthetic scene generator with its augmentation chain.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <veloattn/scan.hpp>
#include <veloattn/synth.hpp>

using namespace veloattn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    const fs::path dir =
        fs::temp_directory_path() / ("veloattn_scan_test_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RadarScan sample_scan(size_t n, uint64_t seed, bool labeled = true) {
    Rng rng(seed);
    RadarScan s;
    s.scan_id = "sample";
    s.positions.resize(n, 2);
    for (size_t i = 0; i < n; ++i) {
        s.positions(i, 0) = rng.uniform(-40.0, 40.0);
        s.positions(i, 1) = rng.uniform(-40.0, 40.0);
        s.velocities.push_back(rng.normal(0.0, 2.0));
        s.rcs.push_back(rng.uniform(-25.0, 10.0));
        if (labeled) s.labels.push_back(rng.uniform() < 0.3 ? 1 : 0);
    }
    return s;
}

} // namespace

TEST_CASE("scan validation rejects malformed containers") {
    RadarScan empty;
    REQUIRE_THROWS_AS(empty.validate(), DataError);

    RadarScan s = sample_scan(4, 1);
    REQUIRE_NOTHROW(s.validate());

    RadarScan short_vel = s;
    short_vel.velocities.pop_back();
    REQUIRE_THROWS_AS(short_vel.validate(), DataError);

    RadarScan nan_pos = s;
    nan_pos.positions(0, 0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(nan_pos.validate(), DataError);

    RadarScan bad_label = s;
    bad_label.labels[2] = 7;
    REQUIRE_THROWS_AS(bad_label.validate(), DataError);

    RadarScan unlabeled = sample_scan(4, 2, false);
    REQUIRE_FALSE(unlabeled.labeled());
    REQUIRE_NOTHROW(unlabeled.validate());
}

TEST_CASE("csv round trip is bit-exact for labeled and unlabeled scans") {
    const fs::path dir = temp_dir();
    for (const bool labeled : {true, false}) {
        RadarScan s = sample_scan(37, labeled ? 10 : 11, labeled);
        const fs::path p = dir / (labeled ? "l.csv" : "u.csv");
        save_scan(s, p);
        RadarScan r = load_scan(p);
        REQUIRE(r.size() == s.size());
        REQUIRE(r.labeled() == labeled);
        for (size_t i = 0; i < s.size(); ++i) {
            REQUIRE(r.positions(i, 0) == s.positions(i, 0)); // exact, not approximate
            REQUIRE(r.positions(i, 1) == s.positions(i, 1));
            REQUIRE(r.velocities[i] == s.velocities[i]);
            REQUIRE(r.rcs[i] == s.rcs[i]);
            if (labeled) REQUIRE(r.labels[i] == s.labels[i]);
        }
    }
}

TEST_CASE("csv uses LF line endings and the documented header") {
    const fs::path dir = temp_dir();
    RadarScan s = sample_scan(2, 3);
    save_scan(s, dir / "s.csv");
    std::ifstream in(dir / "s.csv", std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(content.rfind("x,y,v,rcs,label\n", 0) == 0);
    REQUIRE(content.find('\r') == std::string::npos);
}

TEST_CASE("load_scan rejects malformed files with location info") {
    const fs::path dir = temp_dir();
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary);
        out << body;
        return dir / name;
    };
    REQUIRE_THROWS_AS(load_scan(dir / "missing.csv"), DataError);
    REQUIRE_THROWS_AS(load_scan(write("empty.csv", "")), DataError);
    REQUIRE_THROWS_AS(load_scan(write("bad_header.csv", "a,b,c\n1,2,3\n")), DataError);
    REQUIRE_THROWS_AS(load_scan(write("short_row.csv", "x,y,v,rcs\n1,2,3\n")), DataError);
    REQUIRE_THROWS_AS(load_scan(write("bad_value.csv", "x,y,v,rcs\n1,2,zzz,4\n")), DataError);
    REQUIRE_THROWS_AS(load_scan(write("bad_label.csv", "x,y,v,rcs,label\n1,2,3,4,9\n")), DataError);
    try {
        load_scan(write("line_info.csv", "x,y,v,rcs\n1,2,3,4\n1,bad,3,4\n"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("merge_sensor_scans applies rigid transforms and keeps doppler") {
    RadarScan a;
    a.scan_id = "left";
    a.positions.resize(1, 2);
    a.positions(0, 0) = 1.0;
    a.positions(0, 1) = 0.0;
    a.velocities = {2.5};
    a.rcs = {-3.0};
    a.labels = {1};

    RadarScan b = a;
    b.scan_id = "right";
    b.labels = {0};

    // rotate left sensor by 90 degrees and shift; identity for the right
    SensorPose pa{std::numbers::pi / 2.0, 10.0, 20.0};
    SensorPose pb{};
    RadarScan merged = merge_sensor_scans({{a, pa}, {b, pb}});
    REQUIRE(merged.size() == 2);
    REQUIRE(merged.positions(0, 0) == Catch::Approx(10.0).margin(1e-12));
    REQUIRE(merged.positions(0, 1) == Catch::Approx(21.0).margin(1e-12));
    REQUIRE(merged.positions(1, 0) == 1.0);
    REQUIRE(merged.velocities[0] == 2.5); // radial speed is pose-invariant
    REQUIRE(merged.labels == std::vector<int>{1, 0});
    REQUIRE(merged.scan_id == "left+right");

    // any unlabeled member drops labels from the merge
    RadarScan c = a;
    c.labels.clear();
    REQUIRE_FALSE(merge_sensor_scans({{a, pa}, {c, pb}}).labeled());

    REQUIRE_THROWS_AS(merge_sensor_scans({}), ArgumentError);
    SensorPose bad{std::numeric_limits<double>::infinity(), 0, 0};
    REQUIRE_THROWS_AS(merge_sensor_scans({{a, bad}}), DataError);
}

TEST_CASE("semantic label mapping: moving requires dynamic class and valid track") {
    const LabelMapping m = LabelMapping::automotive_default();
    REQUIRE(map_labels(0, true, m) == 1);
    REQUIRE(map_labels(0, false, m) == 0); // parked vehicle
    REQUIRE(map_labels(11, true, m) == 0); // static environment class
    REQUIRE_THROWS_AS(map_labels(99, true, m), DataError);

    const auto j = nlohmann::json::parse(R"({"dynamic_by_class": {"3": true, "4": false}})");
    const LabelMapping custom = LabelMapping::from_json(j);
    REQUIRE(map_labels(3, true, custom) == 1);
    REQUIRE(map_labels(4, true, custom) == 0);
}

TEST_CASE("split file round trip and split loading") {
    const fs::path dir = temp_dir();
    std::map<std::string, std::string> split;
    for (int i = 0; i < 3; ++i) {
        RadarScan s = sample_scan(8, 100 + static_cast<uint64_t>(i));
        s.scan_id = "scan_" + std::to_string(i);
        save_scan(s, dir / (s.scan_id + ".csv"));
        split[s.scan_id] = (i < 2) ? "train" : "val";
    }
    save_split_file(dir, split);
    REQUIRE(load_split_file(dir) == split);

    const auto train = load_split(dir, "train");
    REQUIRE(train.size() == 2);
    REQUIRE(train[0].scan_id == "scan_0"); // id comes from the file stem
    REQUIRE(train[1].scan_id == "scan_1"); // ordered by id

    REQUIRE_THROWS_AS(load_split(dir, "test"), DataError); // empty split
    REQUIRE_THROWS_AS(load_split_file(dir / "nope"), DataError);

    std::ofstream bad(dir / "split.json", std::ios::binary);
    bad << R"({"scan_0": "holdout"})";
    bad.close();
    REQUIRE_THROWS_AS(load_split_file(dir), DataError); // unknown split name
}

TEST_CASE("synth_scene is deterministic per (seed, index) and varies across indices") {
    SynthConfig cfg;
    cfg.rng_seed = 42;
    const RadarScan a = synth_scene(cfg, 7);
    const RadarScan b = synth_scene(cfg, 7);
    const RadarScan c = synth_scene(cfg, 8);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a.positions(i, 0) == b.positions(i, 0));
        REQUIRE(a.velocities[i] == b.velocities[i]);
        REQUIRE(a.labels[i] == b.labels[i]);
    }
    bool differs = c.size() != a.size();
    for (size_t i = 0; !differs && i < a.size(); ++i)
        differs = a.positions(i, 0) != c.positions(i, 0);
    REQUIRE(differs);
}

TEST_CASE("synth_scene respects configured composition") {
    SynthConfig cfg;
    cfg.rng_seed = 5;
    size_t total = 0, moving = 0;
    for (uint64_t i = 0; i < 50; ++i) {
        const RadarScan s = synth_scene(cfg, i);
        REQUIRE_NOTHROW(s.validate());
        REQUIRE(s.labeled());
        total += s.size();
        size_t m = 0;
        for (int l : s.labels) m += static_cast<size_t>(l);
        moving += m;
        // static floor + at least one cluster point
        REQUIRE(s.size() >= static_cast<size_t>(cfg.n_static_min));
        REQUIRE(m >= static_cast<size_t>(cfg.points_per_cluster_min));
        // all points inside a loose bounding box (positions get cluster noise)
        for (size_t p = 0; p < s.size(); ++p) {
            REQUIRE(std::abs(s.positions(p, 0)) < cfg.field_extent + 10.0);
            REQUIRE(std::abs(s.positions(p, 1)) < cfg.field_extent + 10.0);
        }
    }
    const double moving_frac = static_cast<double>(moving) / static_cast<double>(total);
    REQUIRE(moving_frac > 0.05);
    REQUIRE(moving_frac < 0.5);
}

TEST_CASE("synth clutter carries heavy-tailed doppler on static labels") {
    SynthConfig cfg;
    cfg.rng_seed = 9;
    cfg.clutter_fraction = 0.3;
    size_t fast_static = 0, n_static = 0;
    for (uint64_t i = 0; i < 40; ++i) {
        const RadarScan s = synth_scene(cfg, i);
        for (size_t p = 0; p < s.size(); ++p) {
            if (s.labels[p] != 0) continue;
            ++n_static;
            if (std::abs(s.velocities[p]) > 3.0) ++fast_static;
        }
    }
    // heavy-tailed clutter must make |v| useless as a perfect separator
    REQUIRE(fast_static > 50);
    REQUIRE(static_cast<double>(fast_static) / static_cast<double>(n_static) > 0.01);
    REQUIRE(static_cast<double>(fast_static) / static_cast<double>(n_static) < 0.25);
}

TEST_CASE("synth with zero clutter keeps static doppler near zero") {
    SynthConfig cfg;
    cfg.rng_seed = 13;
    cfg.clutter_fraction = 0.0;
    cfg.noise_sigma_vel = 0.0;
    cfg.cluster_speed_min = 2.0; // every cluster point clearly moving radially?
    for (uint64_t i = 0; i < 10; ++i) {
        const RadarScan s = synth_scene(cfg, i);
        for (size_t p = 0; p < s.size(); ++p)
            if (s.labels[p] == 0) REQUIRE(s.velocities[p] == 0.0);
    }
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    REQUIRE_NOTHROW(cfg.validate());
    SynthConfig bad = cfg;
    bad.clutter_fraction = -0.1;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.n_static_min = 10;
    bad.n_static_max = 5;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.field_extent = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("augment requires labels and preserves row alignment") {
    AugConfig cfg;
    Rng rng(3);
    RadarScan unlabeled = sample_scan(10, 4, false);
    REQUIRE_THROWS_AS(augment(unlabeled, rng, cfg), ArgumentError);

    RadarScan s = sample_scan(50, 5);
    for (int rep = 0; rep < 20; ++rep) {
        const RadarScan out = augment(s, rng, cfg);
        REQUIRE_NOTHROW(out.validate());
        REQUIRE(out.size() >= s.size());
    }
}

TEST_CASE("augment rotation preserves range and doppler") {
    AugConfig cfg;
    cfg.p_jitter = 0.0;
    cfg.p_scale = 0.0;
    cfg.p_rotate = 1.0;
    cfg.p_instance = 0.0;
    RadarScan s = sample_scan(30, 6);
    Rng rng(7);
    const RadarScan out = augment(s, rng, cfg);
    REQUIRE(out.size() == s.size());
    bool rotated = false;
    for (size_t i = 0; i < s.size(); ++i) {
        const double r_in = std::hypot(s.positions(i, 0), s.positions(i, 1));
        const double r_out = std::hypot(out.positions(i, 0), out.positions(i, 1));
        REQUIRE(r_out == Catch::Approx(r_in).epsilon(1e-12));
        REQUIRE(out.velocities[i] == s.velocities[i]); // radial speed unchanged
        REQUIRE(out.labels[i] == s.labels[i]);
        rotated = rotated || std::abs(out.positions(i, 0) - s.positions(i, 0)) > 1e-9;
    }
    REQUIRE(rotated);
}

TEST_CASE("augment scaling multiplies coordinates by one shared factor") {
    AugConfig cfg;
    cfg.p_jitter = 0.0;
    cfg.p_scale = 1.0;
    cfg.p_rotate = 0.0;
    cfg.p_instance = 0.0;
    RadarScan s = sample_scan(10, 8);
    Rng rng(9);
    const RadarScan out = augment(s, rng, cfg);
    const double f = out.positions(0, 0) / s.positions(0, 0);
    REQUIRE(f >= cfg.scale_min);
    REQUIRE(f <= cfg.scale_max);
    for (size_t i = 0; i < s.size(); ++i) {
        REQUIRE(out.positions(i, 0) == Catch::Approx(s.positions(i, 0) * f).epsilon(1e-12));
        REQUIRE(out.positions(i, 1) == Catch::Approx(s.positions(i, 1) * f).epsilon(1e-12));
    }
}

TEST_CASE("augment with all probabilities zero is the identity") {
    AugConfig cfg;
    cfg.p_jitter = cfg.p_scale = cfg.p_rotate = cfg.p_instance = 0.0;
    RadarScan s = sample_scan(15, 10);
    Rng rng(11);
    const RadarScan out = augment(s, rng, cfg);
    REQUIRE(out.size() == s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        REQUIRE(out.positions(i, 0) == s.positions(i, 0));
        REQUIRE(out.velocities[i] == s.velocities[i]);
    }
}

TEST_CASE("instance copy duplicates one moving component with label 1") {
    // two moving clusters far apart plus static background
    RadarScan s;
    s.scan_id = "two_clusters";
    const double px[8] = {10, 10.5, -10, -10.5, 0, 1, 2, 3};
    const double py[8] = {0, 0.3, 0, -0.3, 5, 6, 7, 8};
    const int lab[8] = {1, 1, 1, 1, 0, 0, 0, 0};
    s.positions.resize(8, 2);
    for (size_t i = 0; i < 8; ++i) {
        s.positions(i, 0) = px[i];
        s.positions(i, 1) = py[i];
        s.velocities.push_back(lab[i] ? 3.0 : 0.0);
        s.rcs.push_back(-5.0);
        s.labels.push_back(lab[i]);
    }

    AugConfig cfg;
    cfg.p_jitter = cfg.p_scale = cfg.p_rotate = 0.0;
    cfg.p_instance = 1.0;
    Rng rng(12);
    const RadarScan out = augment(s, rng, cfg);
    REQUIRE(out.size() == 10); // one 2-point component copied
    for (size_t i = 8; i < 10; ++i) {
        REQUIRE(out.labels[i] == 1);
        // copy is a rotation of some original moving point: range preserved
        const double r = std::hypot(out.positions(i, 0), out.positions(i, 1));
        REQUIRE(r == Catch::Approx(std::hypot(10.25, 0.15)).margin(0.4));
        REQUIRE(std::abs(out.velocities[i]) == 3.0);
    }

    // single-linkage at radius 2: the two distant pairs stay separate components
    const auto comps = detail::moving_components(s, cfg.link_radius);
    REQUIRE(comps.size() == 2);
    for (const auto& c : comps) REQUIRE(c.size() == 2);
}

TEST_CASE("instance copy is a no-op when no point moves") {
    RadarScan s = sample_scan(12, 13);
    std::fill(s.labels.begin(), s.labels.end(), 0);
    AugConfig cfg;
    cfg.p_jitter = cfg.p_scale = cfg.p_rotate = 0.0;
    cfg.p_instance = 1.0;
    Rng rng(14);
    REQUIRE(augment(s, rng, cfg).size() == s.size());
}
