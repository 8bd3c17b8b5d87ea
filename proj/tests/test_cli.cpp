// Black-box checks of the command-line binary: every subcommand end to end,
// byte-identical dataset regeneration, and the documented exit codes.
// CLI_PATH is injected by the build so the tests always drive the binary
// they were compiled next to.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#ifndef CLI_PATH
#error "CLI_PATH must be defined to the veloattn binary location"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out; // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// first {...} block in mixed text output
nlohmann::json extract_json(const std::string& text) {
    const size_t open = text.find('{');
    const size_t close = text.rfind('}');
    REQUIRE(open != std::string::npos);
    REQUIRE(close != std::string::npos);
    return nlohmann::json::parse(text.substr(open, close - open + 1));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

size_t line_count(const fs::path& p) {
    const std::string text = slurp(p);
    size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

// shared workspace: a small dataset plus a one-epoch checkpoint, built once
struct CliFixture {
    fs::path root, data, run;

    CliFixture() {
        root = fs::temp_directory_path() / ("veloattn_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        data = root / "data";
        run = root / "run";

        const RunResult synth = run_cli("synth --out-dir " + data.string() +
                                        " --seed 5 --n-train 3 --n-val 2 --n-test 2"
                                        " --n-static-min 8 --n-static-max 12"
                                        " --clusters-min 1 --clusters-max 2"
                                        " --ppc-min 3 --ppc-max 5");
        REQUIRE(synth.code == 0);
        REQUIRE(synth.out.find("wrote 7 scans") != std::string::npos);

        const RunResult train = run_cli("train --data " + data.string() + " --out-dir " +
                                        run.string() +
                                        " --preset tiny --epochs 1 --batch 2 --seed 3");
        REQUIRE(train.code == 0);
        REQUIRE(train.out.find("loaded 3 train / 2 val scans") != std::string::npos);
        REQUIRE(train.out.find("model parameters: 17618") != std::string::npos);
    }

    ~CliFixture() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }

    fs::path checkpoint() const { return run / "model.ckpt"; }
};

const CliFixture& fixture() {
    static CliFixture f;
    return f;
}

} // namespace

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

TEST_CASE("cli: synth writes scans, a split file, and a config echo") {
    const CliFixture& f = fixture();
    REQUIRE(fs::exists(f.data / "split.json"));
    REQUIRE(fs::exists(f.data / "config.json"));
    REQUIRE(fs::exists(f.data / "train_00000.csv"));
    REQUIRE(fs::exists(f.data / "val_00001.csv"));
    REQUIRE(fs::exists(f.data / "test_00001.csv"));
    size_t csvs = 0;
    for (const auto& e : fs::directory_iterator(f.data)) csvs += e.path().extension() == ".csv";
    REQUIRE(csvs == 7);
}

TEST_CASE("cli: identical synth invocations produce byte-identical trees") {
    const fs::path a = fixture().root / "rep_a";
    const fs::path b = fixture().root / "rep_b";
    const std::string args = " --seed 17 --n-train 2 --n-val 1 --n-test 1"
                             " --n-static-min 6 --n-static-max 9"
                             " --clusters-min 1 --clusters-max 2 --ppc-min 3 --ppc-max 4";
    REQUIRE(run_cli("synth --out-dir " + a.string() + args).code == 0);
    REQUIRE(run_cli("synth --out-dir " + b.string() + args).code == 0);

    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename());
    REQUIRE(names.size() == 6); // 4 scans + split.json + config.json
    for (const fs::path& name : names) {
        INFO(name.string());
        REQUIRE(fs::exists(b / name));
        REQUIRE(slurp(a / name) == slurp(b / name));
    }
}

// ---------------------------------------------------------------------------
// train artifacts
// ---------------------------------------------------------------------------

TEST_CASE("cli: train leaves a checkpoint, per-epoch metrics, and a config echo") {
    const CliFixture& f = fixture();
    REQUIRE(fs::exists(f.checkpoint()));
    REQUIRE(fs::exists(f.run / "config.json"));
    REQUIRE(line_count(f.run / "metrics.jsonl") == 1); // one epoch, one line

    const nlohmann::json m = nlohmann::json::parse(slurp(f.run / "metrics.jsonl"));
    REQUIRE(m.at("epoch").get<int>() == 0);
    REQUIRE(m.contains("lr"));
    REQUIRE(m.contains("train_loss"));
    REQUIRE(m.contains("val_iou"));
}

// ---------------------------------------------------------------------------
// eval / infer / bench on the fixture checkpoint
// ---------------------------------------------------------------------------

TEST_CASE("cli: eval prints a machine-readable report") {
    const CliFixture& f = fixture();
    const RunResult r =
        run_cli("eval --checkpoint " + f.checkpoint().string() + " --data " + f.data.string() +
                " --split test");
    REQUIRE(r.code == 0);
    const nlohmann::json j = extract_json(r.out);
    const double iou = j.at("iou_moving").get<double>();
    REQUIRE(iou >= 0.0);
    REQUIRE(iou <= 1.0);
    REQUIRE(j.at("scans").get<size_t>() == 2);
    REQUIRE(j.at("tp").get<int64_t>() >= 0);
}

TEST_CASE("cli: infer labels every input row") {
    const CliFixture& f = fixture();
    const fs::path input = f.data / "test_00000.csv";
    const fs::path output = f.root / "labeled.csv";
    const RunResult r = run_cli("infer --checkpoint " + f.checkpoint().string() + " --input " +
                                input.string() + " --output " + output.string());
    REQUIRE(r.code == 0);
    REQUIRE(line_count(output) == line_count(input)); // header + one row per point
    std::ifstream in(output);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "x,y,v,rcs,label,pred");
}

TEST_CASE("cli: bench reports latency stats against the sensor frame rate") {
    const RunResult r = run_cli("bench --preset tiny --scans 2 --repetitions 1 --seed 2");
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("throughput:") != std::string::npos);
    REQUIRE(r.out.find("17 Hz") != std::string::npos);
    const nlohmann::json j = extract_json(r.out);
    REQUIRE(j.at("samples").get<size_t>() == 2);
    REQUIRE(j.at("mean_s").get<double>() > 0.0);
}

// ---------------------------------------------------------------------------
// baseline on a separable noiseless dataset
// ---------------------------------------------------------------------------

TEST_CASE("cli: baseline saturates on noiseless separable data") {
    const fs::path noiseless = fixture().root / "clean";
    REQUIRE(run_cli("synth --out-dir " + noiseless.string() +
                    " --seed 23 --n-train 2 --n-val 3 --n-test 3"
                    " --sigma-vel 0 --clutter-fraction 0"
                    " --n-static-min 10 --n-static-max 14"
                    " --clusters-min 1 --clusters-max 2 --ppc-min 3 --ppc-max 5")
                .code == 0);
    const RunResult r = run_cli("baseline --data " + noiseless.string() +
                                " --tune-split val --eval-split test");
    REQUIRE(r.code == 0);
    const nlohmann::json j = extract_json(r.out);
    // statics sit at exactly 0 m/s, movers strictly above, so t*=0 is perfect
    REQUIRE(j.at("t_star").get<double>() == 0.0);
    REQUIRE(j.at("tune_iou").get<double>() == 1.0);
    REQUIRE(j.at("eval_iou").get<double>() == 1.0);
    REQUIRE(j.at("tune_split").get<std::string>() == "val");
    REQUIRE(j.at("eval_split").get<std::string>() == "test");
}

// ---------------------------------------------------------------------------
// exit codes
// ---------------------------------------------------------------------------

TEST_CASE("cli: configuration mistakes exit with code 2") {
    const CliFixture& f = fixture();
    const fs::path scratch = f.root / "scratch";

    const RunResult epochs = run_cli("train --data " + f.data.string() + " --out-dir " +
                                     scratch.string() + " --epochs 0");
    REQUIRE(epochs.code == 2);
    REQUIRE(epochs.out.find("config error") != std::string::npos);
    REQUIRE_FALSE(fs::exists(scratch / "config.json")); // rejected before any artifact

    REQUIRE(run_cli("train --data " + f.data.string() + " --out-dir " + scratch.string() +
                    " --preset huge")
                .code == 2);
    REQUIRE(run_cli("synth --out-dir " + scratch.string() + " --no-such-flag").code == 2);
}

TEST_CASE("cli: missing files exit with code 3") {
    const CliFixture& f = fixture();
    REQUIRE(run_cli("train --data /nonexistent/dir --out-dir " + (f.root / "x").string()).code == 3);
    REQUIRE(run_cli("eval --checkpoint /nonexistent.ckpt --data " + f.data.string()).code == 3);
    REQUIRE(run_cli("infer --checkpoint " + f.checkpoint().string() +
                    " --input /nonexistent.csv --output " + (f.root / "y.csv").string())
                .code == 3);
    // a split name never emitted by synth resolves to zero scans
    REQUIRE(run_cli("eval --checkpoint " + f.checkpoint().string() + " --data " + f.data.string() +
                    " --split weekend")
                .code == 3);
}
