#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sagn/dataset.hpp"

using namespace sagn;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  static fs::path dir = [] {
    auto p = fs::temp_directory_path() / "sagn_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAGN_CLI_PATH) + " " + args +
                          " > " + (work_dir() / "stdout.txt").string() +
                          " 2> " + (work_dir() / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string cli_stdout() { return read_file(work_dir() / "stdout.txt"); }

void write_train_config(const fs::path& path) {
  std::ofstream out(path);
  out << "model.hidden = 16\n"
      << "model.k_f = 2\n"
      << "model.dropout = 0.2\n"
      << "model.attention_dropout = 0.0\n"
      << "model.input_dropout = 0.0\n"
      << "sle.k_l = 3\n"
      << "sle.stages = 0\n"
      << "sle.threshold = 0.8\n"
      << "sle.epochs = 30,20,20\n"
      << "sle.lr = 0.01\n"
      << "sle.batch_size = 512\n"
      << "sle.eval_interval = 10\n";
}

}  // namespace

TEST_CASE("cli: gen-sbm is deterministic per seed", "[cli]") {
  const auto d1 = work_dir() / "ds_a";
  const auto d2 = work_dir() / "ds_b";
  const std::string gen_args =
      " --set sbm.nodes=100 --set sbm.classes=3 --set sbm.intra_p=0.2 "
      "--set sbm.inter_p=0.02 --set sbm.feature_dim=8 "
      "--set sbm.train_frac=0.3 --set sbm.valid_frac=0.2";
  REQUIRE(run_cli("gen-sbm --out " + d1.string() + " --seed 7" + gen_args) ==
          0);
  REQUIRE(run_cli("gen-sbm --out " + d2.string() + " --seed 7" + gen_args) ==
          0);
  auto a = load_dataset<float>(d1.string());
  auto b = load_dataset<float>(d2.string());
  REQUIRE(a.content_hash == b.content_hash);
}

TEST_CASE("cli: preprocess writes a hop cache", "[cli]") {
  const auto data = work_dir() / "ds_a";
  const auto hops = work_dir() / "hops.sgnh";
  REQUIRE(run_cli("preprocess --data " + data.string() + " --out " +
                  hops.string() + " --set model.k_f=2") == 0);
  REQUIRE(fs::exists(hops));
}

TEST_CASE("cli: train writes manifest, metrics and checkpoints", "[cli]") {
  const auto data = work_dir() / "ds_a";
  const auto run = work_dir() / "run0";
  const auto cfg = work_dir() / "train.cfg";
  write_train_config(cfg);
  REQUIRE(run_cli("train --data " + data.string() + " --out " + run.string() +
                  " --config " + cfg.string()) == 0);
  REQUIRE(fs::exists(run / "manifest.json"));
  REQUIRE(fs::exists(run / "metrics.jsonl"));
  REQUIRE(fs::exists(run / "report.json"));
  REQUIRE(fs::exists(run / "stage0.sgnp"));
  REQUIRE(!fs::exists(run / "stage1.sgnp"));
}

TEST_CASE("cli: --set override adds stages", "[cli]") {
  const auto data = work_dir() / "ds_a";
  const auto run = work_dir() / "run2";
  const auto cfg = work_dir() / "train.cfg";
  REQUIRE(run_cli("train --data " + data.string() + " --out " + run.string() +
                  " --config " + cfg.string() + " --set sle.stages=2") == 0);
  REQUIRE(fs::exists(run / "stage0.sgnp"));
  REQUIRE(fs::exists(run / "stage1.sgnp"));
  REQUIRE(fs::exists(run / "stage2.sgnp"));
  const std::string metrics = read_file(run / "metrics.jsonl");
  REQUIRE(metrics.find("\"stage\":2") != std::string::npos);
}

TEST_CASE("cli: eval reloads a checkpoint and reports metrics", "[cli]") {
  const auto data = work_dir() / "ds_a";
  const auto run = work_dir() / "run2";
  REQUIRE(run_cli("eval --run " + run.string() + " --data " + data.string()) ==
          0);
  const std::string out = cli_stdout();
  REQUIRE(out.find("\"stage\": 2") != std::string::npos);
  REQUIRE(out.find("\"test\"") != std::string::npos);
}

TEST_CASE("cli: export-attn writes the CSV", "[cli]") {
  const auto data = work_dir() / "ds_a";
  const auto run = work_dir() / "run2";
  const auto csv = work_dir() / "attn.csv";
  REQUIRE(run_cli("export-attn --run " + run.string() + " --data " +
                  data.string() + " --out " + csv.string() +
                  " --count 10") == 0);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  REQUIRE(header == "node_id,hop_0,hop_1,hop_2");
}

TEST_CASE("cli: leakage-probe reports gaps per depth", "[cli]") {
  const auto data = work_dir() / "ds_a";
  REQUIRE(run_cli("leakage-probe --data " + data.string() + " --kl 1,3") ==
          0);
  const std::string out = cli_stdout();
  REQUIRE(out.find("train_self_mass") != std::string::npos);
}

TEST_CASE("cli: missing config file exits 1", "[cli]") {
  const auto data = work_dir() / "ds_a";
  REQUIRE(run_cli("train --data " + data.string() + " --out " +
                  (work_dir() / "runx").string() +
                  " --config /definitely/missing.cfg") == 1);
}

TEST_CASE("cli: unknown flag exits 1 fast", "[cli]") {
  REQUIRE(run_cli("train --frobnicate") == 1);
  REQUIRE(run_cli("--help") == 0);
}

TEST_CASE("cli: unknown config key exits 1", "[cli]") {
  const auto data = work_dir() / "ds_a";
  REQUIRE(run_cli("train --data " + data.string() + " --out " +
                  (work_dir() / "runy").string() +
                  " --set sle.not_a_key=1") == 1);
}

TEST_CASE("cli: missing dataset exits 2", "[cli]") {
  REQUIRE(run_cli("train --data /no/such/dataset --out " +
                  (work_dir() / "runz").string()) == 2);
}
