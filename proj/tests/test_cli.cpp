#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "ctpir_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args) {
  const auto out = workdir() / "stdout.txt", err = workdir() / "stderr.txt";
  const std::string cmd = std::string(CTPIR_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string data_dir() { return (workdir() / "data").string(); }

// Writes a small graph and a fast training config once.
void ensure_data() {
  static bool done = false;
  if (done) return;
  const auto r = run("generate --publications 40 --years 6 --seed 2 --out " + data_dir() +
                     " --config " + (workdir() / "gen.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  done = true;
}

std::string train_config() {
  const auto p = workdir() / "train.json";
  std::ofstream(p) << R"({"epochs": 2, "batch_size": 16, "embed_years": 3, "horizon": 3,
    "layer_dims": [8, 6, 5], "lstm_hidden": 4, "influence_dim": 4, "head_hidden": [4]})";
  return p.string();
}

}  // namespace

TEST_CASE("generate, validate and stats") {
  std::ofstream(workdir() / "gen.json") << R"({"embedding_dim": 8})";
  ensure_data();
  CHECK(fs::exists(fs::path(data_dir()) / "snapshot_2000.json"));

  const auto v = run("validate --data " + data_dir());
  CHECK(v.code == 0);
  CHECK(json::parse(v.out)["ok"] == true);

  const auto s = run("stats --data " + data_dir() + " --relation citedBy --year 2005");
  REQUIRE(s.code == 0);
  const auto rows = json::parse(s.out);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["relation"] == "citedBy");
}

TEST_CASE("train, predict, evaluate and timedist") {
  ensure_data();
  const auto model = (workdir() / "model.json").string();
  const auto hist = (workdir() / "hist.csv").string();
  const auto t = run("train --data " + data_dir() + " --config " + train_config() + " --seed 5 --seeds 2 --out " +
                     model + " --history " + hist);
  REQUIRE_MESSAGE(t.code == 0, t.err);
  const auto summary = json::parse(t.out);
  CHECK(summary["runs"].size() == 2);
  CHECK(slurp(hist).rfind("epoch,male,rmsle\n0,", 0) == 0);

  const auto p = run("predict --data " + data_dir() + " --model " + model + " --horizon 2");
  REQUIRE(p.code == 0);
  CHECK(p.out.rfind("year,publication_id,predicted,observed\n", 0) == 0);

  const auto e = run("evaluate --data " + data_dir() + " --model " + model + " --subtask grown --profile aps");
  REQUIRE(e.code == 0);
  const auto ej = json::parse(e.out);
  CHECK(ej["threshold"] == 30.0);
  CHECK(ej.contains("male"));

  const auto d = run("timedist --data " + data_dir() + " --model " + model);
  REQUIRE(d.code == 0);
  CHECK(json::parse(d.out).size() == 3);

  // Same seed and config give the same model file.
  const auto again = (workdir() / "model2.json").string();
  REQUIRE(run("train --data " + data_dir() + " --config " + train_config() + " --seed 5 --seeds 2 --out " + again)
              .code == 0);
  CHECK(slurp(model) == slurp(again));
}

TEST_CASE("gradcheck subcommand") {
  const auto g = run("gradcheck --seeds 1");
  CHECK(g.code == 0);
  const auto j = json::parse(g.out);
  CHECK(j["ok"] == true);
  CHECK(j["checks"].size() > 20);
}

TEST_CASE("errors are one JSON object on stderr") {
  const auto missing = run("stats --data " + (workdir() / "nowhere").string());
  CHECK(missing.code == 1);
  CHECK(json::parse(missing.err).contains("error"));

  const auto usage = run("evaluate --subtask old");
  CHECK(usage.code == 2);
  CHECK(json::parse(usage.err)["error"] == "usage");

  ensure_data();
  const auto bad_id = run("predict --data " + data_dir() + " --model " + (workdir() / "model.json").string() +
                          " --ids nobody");
  CHECK(bad_id.code == 1);
  CHECK(json::parse(bad_id.err)["error"] == "lookup");
}
