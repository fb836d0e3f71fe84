#include <doctest.h>

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "loadshift/catalog.hpp"
#include "loadshift/cli.hpp"
#include "loadshift/report_io.hpp"

namespace fs = std::filesystem;
using namespace loadshift;

namespace {

const std::string kPresets = LOADSHIFT_PRESET_DIR;

int invoke(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"loadshift"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "loadshift_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("profile writes the ranked front") {
  Workspace ws;
  CHECK(invoke({"profile", "--catalog", kPresets + "/video.catalog", "--out", ws.at("v.front")}) ==
        cli::kExitOk);
  const auto bundle = load_front_bundle(ws.at("v.front"));
  CHECK(bundle.front.size() == 9);
  CHECK(invoke({"profile", "--catalog", kPresets + "/service.catalog", "--out",
                ws.at("s.front")}) == cli::kExitOk);
  CHECK(load_front_bundle(ws.at("s.front")).front.size() == 3);
  CHECK(invoke({"profile", "--catalog", kPresets + "/video.catalog", "--epsilon", "1.0", "--out",
                ws.at("e.front")}) == cli::kExitOk);
  CHECK(load_front_bundle(ws.at("e.front")).front.size() == 2);
  CHECK(invoke({"profile", "--catalog", ws.at("missing.catalog")}) == cli::kExitInput);
}

TEST_CASE("run is reproducible from its manifest") {
  Workspace ws;
  REQUIRE(invoke({"gen-trace", "--duration", "20", "--pps", "2000", "--seed", "3", "--out",
                  ws.at("t.csv")}) == cli::kExitOk);
  const std::string front = kPresets + "/video.catalog";
  auto run_into = [&](const std::string& out) {
    return invoke({"run", "--trace", ws.at("t.csv"), "--front", front, "--cpu-hz", "2e6",
                   "--export-window", "5", "--features", "--out-dir", ws.at(out)});
  };
  REQUIRE(run_into("r1") == cli::kExitOk);
  REQUIRE(run_into("r2") == cli::kExitOk);
  for (const char* name : {"report.json", "timeseries.csv", "switches.csv", "features.jsonl"}) {
    CAPTURE(name);
    CHECK(read_text_file(ws.dir / "r1" / name) == read_text_file(ws.dir / "r2" / name));
  }
  CHECK(fs::file_size(ws.dir / "r1" / "features.jsonl") > 0);

  CHECK(invoke({"replay", "--manifest", ws.at("r1/manifest.json"), "--out-dir", ws.at("r3")}) ==
        cli::kExitOk);
  CHECK(read_text_file(ws.dir / "r3" / "report.json") ==
        read_text_file(ws.dir / "r1" / "report.json"));

  // A tampered output digest is an invariant violation on replay.
  auto manifest = cli::parse_manifest(read_text_file(ws.dir / "r1" / "manifest.json"));
  manifest.outputs["report.json"] = std::string(64, '0');
  write_text_file(ws.dir / "bad.json", cli::manifest_json(manifest));
  CHECK(invoke({"replay", "--manifest", ws.at("bad.json"), "--out-dir", ws.at("r4")}) ==
        cli::kExitInvariant);

  CHECK(invoke({"report", ws.dir.string()}) == cli::kExitOk);
  CHECK(fs::exists(ws.dir / "scatter.csv"));
}

TEST_CASE("static run keeps a constant index column") {
  Workspace ws;
  REQUIRE(invoke({"gen-trace", "--duration", "10", "--pps", "1000", "--out", ws.at("t.csv")}) ==
          cli::kExitOk);
  REQUIRE(invoke({"run", "--trace", ws.at("t.csv"), "--front", kPresets + "/video.catalog",
                  "--mode", "static:1", "--scale", "0.2", "--out-dir", ws.at("s")}) ==
          cli::kExitOk);
  const auto series = parse_timeseries_csv(read_text_file(ws.dir / "s" / "timeseries.csv"));
  REQUIRE(!series.empty());
  for (const auto& p : series) CHECK(p.selected_index == 1);
  const auto summary = parse_report_json(read_text_file(ws.dir / "s" / "report.json"));
  CHECK(summary.totals.loss_pct == 0.0);
}

TEST_CASE("usage and input errors map to exit codes") {
  Workspace ws;
  REQUIRE(invoke({"gen-trace", "--duration", "2", "--pps", "500", "--out", ws.at("t.csv")}) ==
          cli::kExitOk);
  const std::string front = kPresets + "/video.catalog";
  CHECK(invoke({}) == cli::kExitUsage);
  CHECK(invoke({"run", "--front", front}) == cli::kExitUsage);  // no trace
  CHECK(invoke({"frobnicate"}) == cli::kExitUsage);
  CHECK(invoke({"run", "--trace", ws.at("t.csv"), "--front", front, "--mode", "static:12",
                "--out-dir", ws.at("x")}) == cli::kExitInput);
  CHECK(invoke({"run", "--trace", ws.at("nope.csv"), "--front", front, "--out-dir",
                ws.at("x")}) == cli::kExitInput);
  CHECK(invoke({"sweep", "--trace", ws.at("t.csv"), "--front", front, "--values", ""}) ==
        cli::kExitUsage);
  CHECK(invoke({"sweep", "--trace", ws.at("t.csv"), "--front", front, "--param", "queue",
                "--values", "1,2"}) == cli::kExitInput);
  fs::create_directories(ws.dir / "empty");
  CHECK(invoke({"report", ws.at("empty")}) == cli::kExitInput);
  CHECK(invoke({"report", ws.at("absent")}) == cli::kExitInput);
  CHECK(invoke({"--version"}) == cli::kExitOk);
}

TEST_CASE("sweep writes one row per value") {
  Workspace ws;
  REQUIRE(invoke({"gen-trace", "--duration", "10", "--pps", "1000", "--out", ws.at("t.csv")}) ==
          cli::kExitOk);
  REQUIRE(invoke({"sweep", "--trace", ws.at("t.csv"), "--front", kPresets + "/video.catalog",
                  "--param", "mon_window", "--values", "1,2,3", "--out", ws.at("s.csv")}) ==
          cli::kExitOk);
  const auto text = read_text_file(ws.dir / "s.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  REQUIRE(invoke({"sweep", "--trace", ws.at("t.csv"), "--front", kPresets + "/video.catalog",
                  "--param", "dec_factor", "--values", "0.5", "--out", ws.at("d.csv")}) ==
          cli::kExitOk);
}

TEST_CASE("config file supplies option defaults") {
  Workspace ws;
  REQUIRE(invoke({"gen-trace", "--duration", "5", "--pps", "800", "--out", ws.at("t.csv")}) ==
          cli::kExitOk);
  write_text_file(ws.dir / "cfg.toml", "[run]\nmode = \"static:2\"\ncpu-hz = 5e6\n");
  REQUIRE(invoke({"--config", ws.at("cfg.toml"), "run", "--trace", ws.at("t.csv"), "--front",
                  kPresets + "/video.catalog", "--out-dir", ws.at("c")}) == cli::kExitOk);
  const auto manifest = cli::parse_manifest(read_text_file(ws.dir / "c" / "manifest.json"));
  CHECK(manifest.config.mode == RunMode::fixed(2));
  CHECK(manifest.config.cpu_hz == 5e6);
}

TEST_CASE("digests") {
  CHECK(cli::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
