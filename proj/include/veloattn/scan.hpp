#pragma once

// Radar scan data model and file formats.
//
// Scan CSV: UTF-8, LF endings, header `x,y,v,rcs,label` (label column
// optional, then `x,y,v,rcs`), one point per row, numbers written as the
// shortest decimal that round-trips exactly. A dataset is a directory of
// `<scan_id>.csv` files plus `split.json` mapping scan ids to
// train/val/test.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "veloattn/common.hpp"

namespace veloattn {

// One merged radar measurement. Positions are vehicle-frame meters
// (x forward, y left), velocities are ego-motion compensated Doppler
// speeds in m/s, rcs is in dBsm. labels: 0 static, 1 moving; empty when
// the scan is unlabeled.
struct RadarScan {
    Matrix<double> positions;       // N x 2
    std::vector<double> velocities; // N
    std::vector<double> rcs;        // N
    std::vector<int> labels;        // N or empty
    std::string scan_id;

    size_t size() const { return positions.rows(); }
    bool labeled() const { return !labels.empty(); }

    void validate() const {
        const size_t n = size();
        if (n < 1) throw DataError("empty scan '" + scan_id + "'");
        if (velocities.size() != n || rcs.size() != n || (labeled() && labels.size() != n))
            throw DataError("scan '" + scan_id + "': arrays do not share length");
        if (!all_finite(positions) || !all_finite(velocities) || !all_finite(rcs))
            throw DataError("scan '" + scan_id + "': non-finite value");
        for (int l : labels)
            if (l != 0 && l != 1) throw DataError("scan '" + scan_id + "': label outside {0,1}");
    }
};

// Rigid sensor-to-vehicle transform in the plane.
struct SensorPose {
    double yaw = 0.0;
    double tx = 0.0;
    double ty = 0.0;
};

// ---------------------------------------------------------------------------
// CSV round trip
// ---------------------------------------------------------------------------

inline void save_scan(const RadarScan& scan, const std::filesystem::path& path) {
    scan.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << (scan.labeled() ? "x,y,v,rcs,label\n" : "x,y,v,rcs\n");
    for (size_t i = 0; i < scan.size(); ++i) {
        out << format_shortest(scan.positions(i, 0)) << ',' << format_shortest(scan.positions(i, 1))
            << ',' << format_shortest(scan.velocities[i]) << ',' << format_shortest(scan.rcs[i]);
        if (scan.labeled()) out << ',' << scan.labels[i];
        out << '\n';
    }
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

} // namespace detail

inline RadarScan load_scan(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    bool with_labels;
    if (line == "x,y,v,rcs,label")
        with_labels = true;
    else if (line == "x,y,v,rcs")
        with_labels = false;
    else
        throw DataError("'" + path.string() + "': unrecognized header '" + line + "'");

    const size_t n_fields = with_labels ? 5 : 4;
    std::vector<std::array<double, 4>> rows;
    std::vector<int> labels;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != n_fields)
            throw DataError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected " +
                            std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()));
        std::array<double, 4> vals{};
        try {
            for (size_t f = 0; f < 4; ++f) vals[f] = parse_double(fields[f]);
            if (with_labels) labels.push_back(static_cast<int>(parse_long(fields[4])));
        } catch (const DataError& e) {
            throw DataError("'" + path.string() + "' line " + std::to_string(line_no) + ": " + e.what());
        }
        rows.push_back(vals);
    }

    RadarScan scan;
    scan.scan_id = path.stem().string();
    scan.positions.resize(rows.size(), 2);
    scan.velocities.resize(rows.size());
    scan.rcs.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        scan.positions(i, 0) = rows[i][0];
        scan.positions(i, 1) = rows[i][1];
        scan.velocities[i] = rows[i][2];
        scan.rcs[i] = rows[i][3];
    }
    scan.labels = std::move(labels);
    scan.validate();
    return scan;
}

// ---------------------------------------------------------------------------
// Multi-sensor merge: rotate/translate each sensor's points into the vehicle
// frame and concatenate in input order. Doppler velocities are compensated
// radial scalars and transfer unchanged, as does rcs.
// ---------------------------------------------------------------------------

inline RadarScan merge_sensor_scans(const std::vector<std::pair<RadarScan, SensorPose>>& scans) {
    if (scans.empty()) throw ArgumentError("merge_sensor_scans: no input scans");
    size_t total = 0;
    bool labeled = true;
    for (const auto& [scan, pose] : scans) {
        scan.validate();
        if (!std::isfinite(pose.yaw) || !std::isfinite(pose.tx) || !std::isfinite(pose.ty))
            throw DataError("merge_sensor_scans: non-finite sensor pose");
        total += scan.size();
        labeled = labeled && scan.labeled();
    }

    RadarScan out;
    out.positions.resize(total, 2);
    out.velocities.reserve(total);
    out.rcs.reserve(total);
    if (labeled) out.labels.reserve(total);

    size_t row = 0;
    std::string id;
    for (const auto& [scan, pose] : scans) {
        const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
        for (size_t i = 0; i < scan.size(); ++i, ++row) {
            const double x = scan.positions(i, 0), y = scan.positions(i, 1);
            out.positions(row, 0) = c * x - s * y + pose.tx;
            out.positions(row, 1) = s * x + c * y + pose.ty;
        }
        out.velocities.insert(out.velocities.end(), scan.velocities.begin(), scan.velocities.end());
        out.rcs.insert(out.rcs.end(), scan.rcs.begin(), scan.rcs.end());
        if (labeled) out.labels.insert(out.labels.end(), scan.labels.begin(), scan.labels.end());
        id += (id.empty() ? "" : "+") + scan.scan_id;
    }
    out.scan_id = id;
    return out;
}

// ---------------------------------------------------------------------------
// Semantic-to-binary label mapping for external dataset adapters. A semantic
// class maps to moving (1) only when the class is listed as dynamic AND the
// detection belongs to a valid track; parked vehicles (no valid track) map
// to static.
// ---------------------------------------------------------------------------

struct LabelMapping {
    std::map<int, bool> dynamic_by_class;

    // Automotive radar class table used by the bundled adapter docs:
    // ids 0..10 are object classes that move when tracked, 11 is static
    // environment.
    static LabelMapping automotive_default() {
        LabelMapping m;
        for (int c = 0; c <= 10; ++c) m.dynamic_by_class[c] = true;
        m.dynamic_by_class[11] = false;
        return m;
    }

    static LabelMapping from_json(const nlohmann::json& j) {
        LabelMapping m;
        for (const auto& [key, value] : j.at("dynamic_by_class").items())
            m.dynamic_by_class[std::stoi(key)] = value.get<bool>();
        return m;
    }
};

inline int map_labels(int semantic_label, bool track_valid, const LabelMapping& mapping) {
    auto it = mapping.dynamic_by_class.find(semantic_label);
    if (it == mapping.dynamic_by_class.end())
        throw DataError("map_labels: unknown semantic class id " + std::to_string(semantic_label));
    return (it->second && track_valid) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Dataset directory: scans + split.json
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names = {"train", "val", "test"};
    return names;
}

inline void save_split_file(const std::filesystem::path& dir,
                            const std::map<std::string, std::string>& split_by_id) {
    nlohmann::json j(split_by_id);
    std::ofstream out(dir / "split.json", std::ios::binary);
    if (!out) throw DataError("cannot write '" + (dir / "split.json").string() + "'");
    out << j.dump(2) << '\n';
}

inline std::map<std::string, std::string> load_split_file(const std::filesystem::path& dir) {
    const auto path = dir / "split.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path.string() + "': " + e.what());
    }
    std::map<std::string, std::string> split;
    for (const auto& [id, name] : j.items()) {
        const std::string s = name.get<std::string>();
        if (std::find(split_names().begin(), split_names().end(), s) == split_names().end())
            throw DataError("'" + path.string() + "': unknown split '" + s + "' for scan '" + id + "'");
        split[id] = s;
    }
    return split;
}

// Loads every scan of one split, ordered by scan id.
inline std::vector<RadarScan> load_split(const std::filesystem::path& dir, const std::string& split) {
    const auto mapping = load_split_file(dir);
    std::vector<RadarScan> scans;
    for (const auto& [id, s] : mapping) {
        if (s != split) continue;
        scans.push_back(load_scan(dir / (id + ".csv")));
    }
    if (scans.empty()) throw DataError("split '" + split + "' is empty in '" + dir.string() + "'");
    return scans;
}

} // namespace veloattn
