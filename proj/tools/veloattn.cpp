// veloattn: synth | train | eval | baseline | infer | bench
//
// One binary for the whole pipeline. Every run is deterministic given its
// effective config, which is echoed to --out-dir/config.json so any result
// can be reproduced from the artifact alone. Settings resolve in order:
// built-in defaults < --config JSON < --preset < explicit flags.
//
// Exit codes: 0 success, 2 config/usage error, 3 data/I-O error,
// 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include <veloattn/veloattn.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace veloattn;

namespace {

struct Opts {
    // model
    std::string stage_channels = "32,64,128,256,512";
    size_t n_vtl = 16, n_tus = 12, k_ds = 16, d_p = 8, d_v = 4;
    bool no_decoder_blocks = false;
    std::string preset; // "", "tiny", "paper"

    // train
    int epochs = 50;
    size_t batch = 16;
    double lr = 5e-4;
    double weight_decay = 0.01;
    double w_static = 0.5, w_moving = 8.0;
    double lambda_ce = 1.0, lambda_lov = 1.0;
    bool no_augment = false;
    uint64_t seed = 0;

    // synth
    size_t n_train = 256, n_val = 64, n_test = 64;
    int n_static_min = 60, n_static_max = 120;
    int clusters_min = 1, clusters_max = 4;
    int ppc_min = 6, ppc_max = 14;
    double speed_min = 0.3, speed_max = 6.0;
    double sigma_pos = 0.5, sigma_vel = 0.2;
    double clutter_fraction = 0.15;
    double field_extent = 40.0;

    // paths and misc
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint;
    std::string input, output;
    std::string split = "test";
    std::string tune_split = "val", eval_split = "test";
    size_t bench_scans = 1000;
    int repetitions = 1;
    std::string precision; // "", "single", "double"
};

std::vector<size_t> parse_channels(const std::string& s) {
    std::vector<size_t> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        const size_t comma = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, comma - pos);
        if (tok.empty()) throw ConfigError("stage-channels: empty entry in '" + s + "'");
        const long v = parse_long(tok);
        if (v <= 0) throw ConfigError("stage-channels: widths must be positive, got '" + tok + "'");
        out.push_back(static_cast<size_t>(v));
        pos = comma + 1;
    }
    return out;
}

ModelConfig model_config(const Opts& o) {
    ModelConfig cfg;
    cfg.stage_channels = parse_channels(o.stage_channels);
    cfg.n_vtl = o.n_vtl;
    cfg.n_tus = o.n_tus;
    cfg.k_ds = o.k_ds;
    cfg.d_p = o.d_p;
    cfg.d_v = o.d_v;
    cfg.decoder_blocks = !o.no_decoder_blocks;
    cfg.validate();
    return cfg;
}

TrainConfig train_config(const Opts& o) {
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.lr0 = o.lr;
    cfg.weight_decay = o.weight_decay;
    cfg.class_weights = {o.w_static, o.w_moving};
    cfg.lambda_ce = o.lambda_ce;
    cfg.lambda_lov = o.lambda_lov;
    cfg.augment = !o.no_augment;
    cfg.rng_seed = o.seed;
    cfg.validate();
    return cfg;
}

SynthConfig synth_config(const Opts& o) {
    SynthConfig cfg;
    cfg.n_static_min = o.n_static_min;
    cfg.n_static_max = o.n_static_max;
    cfg.n_clusters_min = o.clusters_min;
    cfg.n_clusters_max = o.clusters_max;
    cfg.points_per_cluster_min = o.ppc_min;
    cfg.points_per_cluster_max = o.ppc_max;
    cfg.cluster_speed_min = o.speed_min;
    cfg.cluster_speed_max = o.speed_max;
    cfg.noise_sigma_pos = o.sigma_pos;
    cfg.noise_sigma_vel = o.sigma_vel;
    cfg.clutter_fraction = o.clutter_fraction;
    cfg.field_extent = o.field_extent;
    cfg.rng_seed = o.seed;
    cfg.validate();
    return cfg;
}

json opts_to_json(const Opts& o, Precision prec) {
    return {
        {"model",
         {{"stage_channels", o.stage_channels},
          {"n_vtl", o.n_vtl},
          {"n_tus", o.n_tus},
          {"k_ds", o.k_ds},
          {"d_p", o.d_p},
          {"d_v", o.d_v},
          {"decoder_blocks", !o.no_decoder_blocks}}},
        {"train",
         {{"epochs", o.epochs},
          {"batch", o.batch},
          {"lr", o.lr},
          {"weight_decay", o.weight_decay},
          {"w_static", o.w_static},
          {"w_moving", o.w_moving},
          {"lambda_ce", o.lambda_ce},
          {"lambda_lov", o.lambda_lov},
          {"augment", !o.no_augment},
          {"seed", o.seed}}},
        {"synth",
         {{"n_train", o.n_train},
          {"n_val", o.n_val},
          {"n_test", o.n_test},
          {"n_static_min", o.n_static_min},
          {"n_static_max", o.n_static_max},
          {"clusters_min", o.clusters_min},
          {"clusters_max", o.clusters_max},
          {"ppc_min", o.ppc_min},
          {"ppc_max", o.ppc_max},
          {"speed_min", o.speed_min},
          {"speed_max", o.speed_max},
          {"sigma_pos", o.sigma_pos},
          {"sigma_vel", o.sigma_vel},
          {"clutter_fraction", o.clutter_fraction},
          {"field_extent", o.field_extent}}},
        // paths are invocation-specific and deliberately not echoed: repeated
        // runs into different directories must produce byte-identical trees
        {"precision", prec == Precision::Single ? "single" : "double"},
    };
}

// Applies values present in the JSON config file; missing keys keep defaults.
void apply_json(Opts& o, const json& j) {
    auto get = [](const json& obj, const char* key, auto& dst) {
        if (obj.contains(key)) dst = obj.at(key).get<std::decay_t<decltype(dst)>>();
    };
    if (j.contains("model")) {
        const json& m = j.at("model");
        get(m, "stage_channels", o.stage_channels);
        get(m, "n_vtl", o.n_vtl);
        get(m, "n_tus", o.n_tus);
        get(m, "k_ds", o.k_ds);
        get(m, "d_p", o.d_p);
        get(m, "d_v", o.d_v);
        if (m.contains("decoder_blocks")) o.no_decoder_blocks = !m.at("decoder_blocks").get<bool>();
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        get(t, "epochs", o.epochs);
        get(t, "batch", o.batch);
        get(t, "lr", o.lr);
        get(t, "weight_decay", o.weight_decay);
        get(t, "w_static", o.w_static);
        get(t, "w_moving", o.w_moving);
        get(t, "lambda_ce", o.lambda_ce);
        get(t, "lambda_lov", o.lambda_lov);
        if (t.contains("augment")) o.no_augment = !t.at("augment").get<bool>();
        get(t, "seed", o.seed);
    }
    if (j.contains("synth")) {
        const json& s = j.at("synth");
        get(s, "n_train", o.n_train);
        get(s, "n_val", o.n_val);
        get(s, "n_test", o.n_test);
        get(s, "n_static_min", o.n_static_min);
        get(s, "n_static_max", o.n_static_max);
        get(s, "clusters_min", o.clusters_min);
        get(s, "clusters_max", o.clusters_max);
        get(s, "ppc_min", o.ppc_min);
        get(s, "ppc_max", o.ppc_max);
        get(s, "speed_min", o.speed_min);
        get(s, "speed_max", o.speed_max);
        get(s, "sigma_pos", o.sigma_pos);
        get(s, "sigma_vel", o.sigma_vel);
        get(s, "clutter_fraction", o.clutter_fraction);
        get(s, "field_extent", o.field_extent);
    }
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        get(p, "out_dir", o.out_dir);
        get(p, "data_dir", o.data_dir);
        get(p, "checkpoint", o.checkpoint);
        get(p, "input", o.input);
        get(p, "output", o.output);
    }
    if (j.contains("precision")) o.precision = j.at("precision").get<std::string>();
}

void apply_preset(Opts& o) {
    if (o.preset.empty() || o.preset == "paper") {
        if (o.preset == "paper") {
            o.stage_channels = "32,64,128,256,512";
            o.n_vtl = 16;
            o.n_tus = 12;
            o.k_ds = 16;
        }
        return;
    }
    if (o.preset == "tiny") {
        o.stage_channels = "8,16,32";
        o.n_vtl = 8;
        o.n_tus = 6;
        o.k_ds = 8;
        return;
    }
    throw ConfigError("unknown preset '" + o.preset + "' (expected tiny or paper)");
}

Precision resolve_precision(const Opts& o) {
    if (!o.precision.empty()) return parse_precision(o.precision);
    if (const char* env = std::getenv("VELO_ATTN_PRECISION")) return parse_precision(env);
    return Precision::Single;
}

void echo_config(const Opts& o, Precision prec) {
    if (o.out_dir.empty()) return;
    fs::create_directories(o.out_dir);
    std::ofstream out(fs::path(o.out_dir) / "config.json", std::ios::binary);
    if (!out) throw DataError("cannot write config echo under '" + o.out_dir + "'");
    out << opts_to_json(o, prec).dump(2) << "\n";
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const Opts& o, Precision prec) {
    require(!o.out_dir.empty(), "synth: --out-dir is required");
    echo_config(o, prec);
    const SynthConfig cfg = synth_config(o);

    const fs::path dir(o.out_dir);
    std::map<std::string, std::string> split_by_id;
    uint64_t index = 0;
    size_t points = 0, moving = 0;
    auto emit = [&](const std::string& split, size_t count) {
        for (size_t i = 0; i < count; ++i, ++index) {
            RadarScan scan = synth_scene(cfg, index);
            char name[32];
            std::snprintf(name, sizeof(name), "%s_%05zu", split.c_str(), i);
            scan.scan_id = name;
            save_scan(scan, dir / (scan.scan_id + ".csv"));
            split_by_id[scan.scan_id] = split;
            points += scan.size();
            for (int32_t l : scan.labels) moving += static_cast<size_t>(l);
        }
    };
    emit("train", o.n_train);
    emit("val", o.n_val);
    emit("test", o.n_test);
    save_split_file(dir, split_by_id);

    std::cout << "wrote " << split_by_id.size() << " scans to " << dir.string() << "\n"
              << "points: " << points << " total, " << moving << " moving, " << points - moving
              << " static\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

template <class T>
int cmd_train(const Opts& o, Precision prec) {
    require(!o.data_dir.empty(), "train: --data is required");
    require(!o.out_dir.empty(), "train: --out-dir is required");
    const ModelConfig mcfg = model_config(o);
    const TrainConfig tcfg = train_config(o);
    echo_config(o, prec);

    const auto train_scans = load_split(o.data_dir, "train");
    const auto val_scans = load_split(o.data_dir, "val");
    std::cout << "loaded " << train_scans.size() << " train / " << val_scans.size()
              << " val scans\n";

    Model<T> model = build_model<T>(mcfg, o.seed);
    std::cout << "model parameters: " << model.params.total_size() << "\n";

    std::ofstream metrics(fs::path(o.out_dir) / "metrics.jsonl", std::ios::binary);
    if (!metrics) throw DataError("cannot write metrics under '" + o.out_dir + "'");
    const TrainResult result =
        train(model, train_scans, val_scans, tcfg, [&](const EpochMetrics& m) {
            metrics << m.to_json().dump() << "\n";
            metrics.flush();
            std::cout << "epoch " << m.epoch << " lr " << m.lr << " train_loss " << m.train_loss
                      << " val_iou " << m.val_iou << "\n";
        });

    const fs::path ckpt = fs::path(o.out_dir) / "model.ckpt";
    save_model(model, ckpt);
    std::cout << "best val_iou " << result.best_val_iou << " at epoch " << result.best_epoch
              << "\ncheckpoint: " << ckpt.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

template <class T>
int cmd_eval(const Opts& o, Precision prec) {
    require(!o.checkpoint.empty(), "eval: --checkpoint is required");
    require(!o.data_dir.empty(), "eval: --data is required");
    echo_config(o, prec);

    Model<T> model = load_model<T>(o.checkpoint);
    const auto scans = load_split(o.data_dir, o.split);
    const EvalReport report = evaluate(model, scans);

    const json j = report.to_json();
    std::cout << j.dump(2) << "\n";
    if (!o.out_dir.empty()) {
        std::ofstream out(fs::path(o.out_dir) / "eval.json", std::ios::binary);
        out << j.dump(2) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// baseline: tune |v| > t on one split, apply to another.
// ---------------------------------------------------------------------------

int cmd_baseline(const Opts& o, Precision prec) {
    require(!o.data_dir.empty(), "baseline: --data is required");
    echo_config(o, prec);

    const auto tune_scans = load_split(o.data_dir, o.tune_split);
    const auto eval_scans = load_split(o.data_dir, o.eval_split);

    const ThresholdCurve curve = tune_threshold(tune_scans);
    ConfusionCounts counts;
    for (const RadarScan& s : eval_scans) counts.add(threshold_baseline(s, curve.best_t), s.labels);

    json j = {{"t_star", curve.best_t},
              {"tune_split", o.tune_split},
              {"tune_iou", curve.best_iou},
              {"eval_split", o.eval_split},
              {"eval_iou", counts.iou_moving()},
              {"tp", counts.tp},
              {"fp", counts.fp},
              {"fn", counts.fn},
              {"tn", counts.tn}};
    std::cout << j.dump(2) << "\n";

    if (!o.out_dir.empty()) {
        std::ofstream csv(fs::path(o.out_dir) / "threshold_curve.csv", std::ios::binary);
        if (!csv) throw DataError("cannot write threshold curve under '" + o.out_dir + "'");
        csv << "t,iou_moving\n";
        for (const auto& [t, iou] : curve.curve)
            csv << format_shortest(t) << "," << format_shortest(iou) << "\n";
        std::ofstream rep(fs::path(o.out_dir) / "baseline.json", std::ios::binary);
        rep << j.dump(2) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// infer: label one scan CSV, appending a `pred` column.
// ---------------------------------------------------------------------------

template <class T>
int cmd_infer(const Opts& o, Precision) {
    require(!o.checkpoint.empty(), "infer: --checkpoint is required");
    require(!o.input.empty(), "infer: --input is required");
    require(!o.output.empty(), "infer: --output is required");

    Model<T> model = load_model<T>(o.checkpoint);
    const RadarScan scan = load_scan(o.input);
    ForwardTape<T> tape;
    const std::vector<int32_t> pred = predict(model, scan, tape);

    std::ofstream out(o.output, std::ios::binary);
    if (!out) throw DataError("infer: cannot write '" + o.output + "'");
    out << (scan.labeled() ? "x,y,v,rcs,label,pred\n" : "x,y,v,rcs,pred\n");
    for (size_t i = 0; i < scan.size(); ++i) {
        out << format_shortest(scan.positions(i, 0)) << ',' << format_shortest(scan.positions(i, 1))
            << ',' << format_shortest(scan.velocities[i]) << ',' << format_shortest(scan.rcs[i]);
        if (scan.labeled()) out << ',' << scan.labels[i];
        out << ',' << pred[i] << '\n';
    }
    std::cout << "wrote " << scan.size() << " rows to " << o.output << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench: forward latency over synthetic merged-scan-sized clouds.
// ---------------------------------------------------------------------------

template <class T>
int cmd_bench(const Opts& o, Precision prec) {
    echo_config(o, prec);
    Model<T> model = o.checkpoint.empty() ? build_model<T>(model_config(o), o.seed)
                                          : load_model<T>(o.checkpoint);

    // merged-scan sparsity: a few hundred points per cloud
    SynthConfig cfg = synth_config(o);
    cfg.n_static_min = 200;
    cfg.n_static_max = 250;
    cfg.n_clusters_min = 2;
    cfg.n_clusters_max = 5;
    std::vector<RadarScan> scans;
    scans.reserve(o.bench_scans);
    size_t total_points = 0;
    for (size_t i = 0; i < o.bench_scans; ++i) {
        scans.push_back(synth_scene(cfg, i));
        total_points += scans.back().size();
    }

    const LatencyStats stats = benchmark_latency(model, scans, o.repetitions);
    json j = stats.to_json();
    j["mean_points"] = static_cast<double>(total_points) / static_cast<double>(scans.size());
    std::cout << j.dump(2) << "\n";
    std::cout << "throughput: " << 1.0 / stats.mean_s << " scans/s\n";
    std::cout << "real-time reference: 17 Hz sensor frame rate (0.0588 s per scan)\n";
    if (!o.out_dir.empty()) {
        std::ofstream out(fs::path(o.out_dir) / "latency.json", std::ios::binary);
        out << j.dump(2) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

void add_model_flags(CLI::App* cmd, Opts& o) {
    cmd->add_option("--stage-channels", o.stage_channels, "comma-separated stage widths");
    cmd->add_option("--n-vtl", o.n_vtl, "attention neighborhood size");
    cmd->add_option("--n-tus", o.n_tus, "upsampling neighborhood size");
    cmd->add_option("--k-ds", o.k_ds, "downsampling group size");
    cmd->add_option("--d-p", o.d_p, "upsampler position encoding width");
    cmd->add_option("--d-v", o.d_v, "upsampler velocity encoding width");
    cmd->add_flag("--no-decoder-blocks", o.no_decoder_blocks,
                  "skip attention blocks on the decoder path");
    cmd->add_option("--preset", o.preset, "tiny or paper parameter bundle");
}

void add_synth_flags(CLI::App* cmd, Opts& o) {
    cmd->add_option("--n-static-min", o.n_static_min);
    cmd->add_option("--n-static-max", o.n_static_max);
    cmd->add_option("--clusters-min", o.clusters_min);
    cmd->add_option("--clusters-max", o.clusters_max);
    cmd->add_option("--ppc-min", o.ppc_min, "points per cluster, lower bound");
    cmd->add_option("--ppc-max", o.ppc_max, "points per cluster, upper bound");
    cmd->add_option("--speed-min", o.speed_min);
    cmd->add_option("--speed-max", o.speed_max);
    cmd->add_option("--sigma-pos", o.sigma_pos, "cluster spread, meters");
    cmd->add_option("--sigma-vel", o.sigma_vel, "velocity noise, m/s");
    cmd->add_option("--clutter-fraction", o.clutter_fraction);
    cmd->add_option("--extent", o.field_extent, "field half-width, meters");
}

int dispatch(const std::string& cmd, const Opts& o) {
    const Precision prec = resolve_precision(o);
    auto typed = [&](auto run) {
        return prec == Precision::Single ? run(float{}) : run(double{});
    };
    if (cmd == "synth") return cmd_synth(o, prec);
    if (cmd == "train")
        return typed([&](auto t) { return cmd_train<decltype(t)>(o, prec); });
    if (cmd == "eval")
        return typed([&](auto t) { return cmd_eval<decltype(t)>(o, prec); });
    if (cmd == "baseline") return cmd_baseline(o, prec);
    if (cmd == "infer")
        return typed([&](auto t) { return cmd_infer<decltype(t)>(o, prec); });
    if (cmd == "bench")
        return typed([&](auto t) { return cmd_bench<decltype(t)>(o, prec); });
    throw ConfigError("no command given (expected synth|train|eval|baseline|infer|bench)");
}

} // namespace

int main(int argc, char** argv) {
    Opts o;

    try {
        // --config and --preset must apply before flag parsing so explicit
        // flags override them
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string_view(argv[i]) == "--config") {
                std::ifstream in(argv[i + 1]);
                if (!in) throw DataError(std::string("cannot open config '") + argv[i + 1] + "'");
                json j;
                try {
                    j = json::parse(in);
                } catch (const json::exception& e) {
                    throw ConfigError(std::string("config parse error: ") + e.what());
                }
                apply_json(o, j);
            }
        }
        for (int i = 1; i + 1 < argc; ++i)
            if (std::string_view(argv[i]) == "--preset") {
                o.preset = argv[i + 1];
                apply_preset(o);
            }

        CLI::App app{"moving-object segmentation for sparse radar point clouds"};
        app.require_subcommand(0, 1);
        std::string config_path; // consumed above; declared so CLI11 accepts it
        app.add_option("--config", config_path, "JSON config file")->expected(1);
        app.add_option("--precision", o.precision, "single or double (or VELO_ATTN_PRECISION)");

        CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
        synth->add_option("--out-dir", o.out_dir)->required();
        synth->add_option("--seed", o.seed);
        synth->add_option("--n-train", o.n_train);
        synth->add_option("--n-val", o.n_val);
        synth->add_option("--n-test", o.n_test);
        add_synth_flags(synth, o);

        CLI::App* train = app.add_subcommand("train", "train a model on a dataset directory");
        train->add_option("--data", o.data_dir)->required();
        train->add_option("--out-dir", o.out_dir)->required();
        train->add_option("--epochs", o.epochs);
        train->add_option("--batch", o.batch, "gradient accumulation count");
        train->add_option("--lr", o.lr, "initial learning rate");
        train->add_option("--weight-decay", o.weight_decay);
        train->add_option("--w-static", o.w_static, "cross-entropy weight, static class");
        train->add_option("--w-moving", o.w_moving, "cross-entropy weight, moving class");
        train->add_option("--lambda-ce", o.lambda_ce);
        train->add_option("--lambda-lov", o.lambda_lov);
        train->add_flag("--no-augment", o.no_augment);
        train->add_option("--seed", o.seed);
        add_model_flags(train, o);

        CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
        eval->add_option("--checkpoint", o.checkpoint)->required();
        eval->add_option("--data", o.data_dir)->required();
        eval->add_option("--split", o.split);
        eval->add_option("--out-dir", o.out_dir);

        CLI::App* baseline =
            app.add_subcommand("baseline", "tune and evaluate the |v| > t threshold");
        baseline->add_option("--data", o.data_dir)->required();
        baseline->add_option("--tune-split", o.tune_split);
        baseline->add_option("--eval-split", o.eval_split);
        baseline->add_option("--out-dir", o.out_dir);

        CLI::App* infer = app.add_subcommand("infer", "label one scan CSV");
        infer->add_option("--checkpoint", o.checkpoint)->required();
        infer->add_option("--input", o.input)->required();
        infer->add_option("--output", o.output)->required();

        CLI::App* bench = app.add_subcommand("bench", "forward latency benchmark");
        bench->add_option("--checkpoint", o.checkpoint);
        bench->add_option("--scans", o.bench_scans);
        bench->add_option("--repetitions", o.repetitions);
        bench->add_option("--seed", o.seed);
        bench->add_option("--out-dir", o.out_dir);
        add_model_flags(bench, o);

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2; // usage problems are config errors
        }

        std::string cmd;
        for (const CLI::App* sub : {synth, train, eval, baseline, infer, bench})
            if (sub->parsed()) cmd = sub->get_name();
        return dispatch(cmd, o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
