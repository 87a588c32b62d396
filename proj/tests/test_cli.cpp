#include <filesystem>
#include <fstream>

#include "cfocal/commands.hpp"
#include "doctest.h"

using namespace cfocal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("cfocal-cli-" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

size_t count_lines(const std::string& text) {
    size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("crlb command: csv shape and usage errors") {
    TempDir dir("crlb");
    RunConfig cfg;
    cfg.command = "crlb";
    cfg.out_dir = dir.str();
    cfg.snr_list = {0, 3, 6, 9, 12};
    CHECK(commands::run_crlb(cfg) == 0);
    const std::string csv = slurp(fs::path(dir.str()) / "crlb.csv");
    CHECK(count_lines(csv) == 6);  // header + 5 rows
    CHECK(csv.rfind("snr_db,crlb_hz2\n", 0) == 0);
    CHECK(fs::exists(fs::path(dir.str()) / "manifest-crlb.txt"));

    RunConfig empty = cfg;
    empty.snr_list.clear();
    CHECK_THROWS_AS(commands::run_crlb(empty), std::invalid_argument);
}

TEST_CASE("crlb command: manifest replay reproduces outputs byte for byte") {
    TempDir dir("replay");
    RunConfig cfg;
    cfg.command = "crlb";
    cfg.out_dir = dir.str();
    cfg.snr_list = {0, 6, 12};
    cfg.seed = 77;
    REQUIRE(commands::run_crlb(cfg) == 0);
    const std::string first_csv = slurp(fs::path(dir.str()) / "crlb.csv");
    const std::string first_manifest = slurp(fs::path(dir.str()) / "manifest-crlb.txt");

    RunConfig replay;
    replay.apply(parse_config_file((fs::path(dir.str()) / "manifest-crlb.txt").string()));
    CHECK(replay.command == "crlb");
    CHECK(replay.seed == 77);
    REQUIRE(commands::dispatch(replay) == 0);
    CHECK(slurp(fs::path(dir.str()) / "crlb.csv") == first_csv);
    CHECK(slurp(fs::path(dir.str()) / "manifest-crlb.txt") == first_manifest);
}

TEST_CASE("run config: serialize/apply round trip") {
    RunConfig cfg;
    cfg.command = "eval-variance";
    cfg.out_dir = "runs/x";
    cfg.seed = 123;
    cfg.snr_list = {0, 3};
    cfg.trials = 50;
    cfg.checkpoint_path = "a.cfof";
    cfg.captures = {"c1", "c2"};
    cfg.ofdm.symbol_len = 64;
    cfg.learning_rate = 5e-4;

    RunConfig parsed;
    parsed.apply(parse_config_text(cfg.serialize()));
    CHECK(parsed.command == cfg.command);
    CHECK(parsed.out_dir == cfg.out_dir);
    CHECK(parsed.seed == cfg.seed);
    CHECK(parsed.snr_list == cfg.snr_list);
    CHECK(parsed.trials == cfg.trials);
    CHECK(parsed.checkpoint_path == cfg.checkpoint_path);
    CHECK(parsed.captures == cfg.captures);
    CHECK(parsed.ofdm.symbol_len == 64);
    CHECK(parsed.learning_rate == doctest::Approx(5e-4));
    CHECK(parsed.serialize() == cfg.serialize());
}

TEST_CASE("simulate + eval-errdist: capture files and long-format rows") {
    TempDir dir("errdist");
    RunConfig sim;
    sim.command = "simulate";
    sim.out_dir = dir.str();
    sim.profile_name = "stable";
    sim.frames = 2;
    sim.snr_db = 30.0;
    sim.seed = 5;
    // small geometry to keep the emulation fast
    sim.ofdm.symbol_len = 32;
    sim.ofdm.cp_len = 8;
    sim.ofdm.num_symbols = 4;
    CHECK(commands::run_simulate(sim) == 0);
    CHECK(fs::exists(fs::path(dir.str()) / "stable.cf32"));
    CHECK(fs::exists(fs::path(dir.str()) / "stable.meta"));
    CHECK(fs::exists(fs::path(dir.str()) / "stable.bits"));

    RunConfig ed;
    ed.command = "eval-errdist";
    ed.out_dir = dir.str();
    ed.snr_list = {0, 10};
    ed.trials = 40;
    ed.ofdm = sim.ofdm;
    ed.seed = 6;
    CHECK(commands::run_eval_errdist(ed) == 0);
    const std::string csv = slurp(fs::path(dir.str()) / "errdist.csv");
    CHECK(count_lines(csv) == 1 + 2 * 40);  // header + snr x method(cp) x trials

    // errors are sorted within each (snr, method) block
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    double prev = -1e30;
    int block = 0;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const double snr = std::stod(line.substr(0, c1));
        const double err = std::stod(line.substr(c2 + 1));
        const int this_block = snr == 0 ? 0 : 1;
        if (this_block != block) {
            block = this_block;
            prev = -1e30;
        }
        CHECK(err >= prev);
        prev = err;
    }
}

TEST_CASE("pipeline: pretrain, eval-ber, constellation at small geometry") {
    TempDir dir("pipeline");
    OfdmConfig small;
    small.symbol_len = 32;
    small.cp_len = 8;
    small.num_symbols = 4;

    RunConfig pre;
    pre.command = "pretrain";
    pre.out_dir = dir.str();
    pre.seed = 41;
    pre.train_n = 700;
    pre.val_n = 128;
    pre.epochs = 3;
    pre.batch_size = 64;
    pre.ofdm = small;
    REQUIRE(commands::run_pretrain(pre) == 0);
    const std::string ckpt = (fs::path(dir.str()) / "pretrained.cfof").string();

    // Clean flat-fading capture: zero-offset methods demodulate error-free.
    RunConfig ber;
    ber.command = "eval-ber";
    ber.out_dir = (fs::path(dir.str()) / "ber").string();
    ber.seed = 42;
    ber.checkpoint_path = ckpt;
    ber.profile_name = "neutral";
    ber.frames = 6;
    ber.snr_db = 300.0;
    ber.capture_taps = 1;
    REQUIRE(commands::run_eval_ber(ber) == 0);
    const std::string csv = slurp(fs::path(ber.out_dir) / "ber.csv");
    CHECK(csv.find("neutral,none,0\n") != std::string::npos);
    CHECK(csv.find("neutral,cp,0\n") != std::string::npos);

    RunConfig con;
    con.command = "constellation";
    con.out_dir = (fs::path(dir.str()) / "con").string();
    con.checkpoint_path = ckpt;
    con.captures = {(fs::path(ber.out_dir) / "capture-neutral").string()};
    REQUIRE(commands::run_constellation(con) == 0);
    const std::string ccsv = slurp(fs::path(con.out_dir) / "constellation.csv");
    // header + frames * symbols * (K-1) rows
    CHECK(count_lines(ccsv) == 1 + 6 * 4 * 31);

    // Per-symbol mean power of the emitted points is exactly normalized.
    std::istringstream in(ccsv);
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::pair<double, int>> power;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        const auto c4 = line.find(',', c3 + 1);
        const double re = std::stod(line.substr(c3 + 1, c4 - c3 - 1));
        const double im = std::stod(line.substr(c4 + 1));
        auto& acc = power[line.substr(0, c2)];
        acc.first += re * re + im * im;
        acc.second += 1;
    }
    for (const auto& [key, acc] : power)
        CHECK(std::abs(acc.first / acc.second - 1.0) < 1e-9);
}

TEST_CASE("dispatch: unknown command rejected") {
    RunConfig cfg;
    cfg.command = "frobnicate";
    CHECK_THROWS_AS(commands::dispatch(cfg), std::invalid_argument);
}

TEST_CASE("eval-variance: checkpoint required") {
    RunConfig cfg;
    cfg.command = "eval-variance";
    cfg.snr_list = {0};
    CHECK_THROWS_AS(commands::run_eval_variance(cfg), std::invalid_argument);
}
