#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <doctest.h>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TDALIGN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

bool exists_under(const std::string& root, const std::string& filename) {
    if (!fs::exists(root)) {
        return false;
    }
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.path().filename() == filename) {
            return true;
        }
    }
    return false;
}

std::string tiny_config(const test_util::TempDir& dir, const std::string& name,
                        const std::string& extra = "") {
    const std::string path = dir.str(name);
    test_util::write_file(path, R"({
  "synth_kind": "ar1",
  "synth_T": 200,
  "synth_N": 2,
  "lookback": 8,
  "horizon": 4,
  "model": "linear",
  "kernel": 1,
  "epochs": 1,
  "batch_size": 16,
  "seeds": [0],
  "out_dir": ")" + dir.str("runs") + "\"" + extra + "\n}\n");
    return path;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("train") == 1);                                 // --config is required
    CHECK(run_cli("train --config /nonexistent/c.json") == 1);
    CHECK(run_cli("frobnicate") == 1);
}

TEST_CASE("help exits cleanly") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("train --help") == 0);
}

TEST_CASE("a malformed config exits with code 1") {
    test_util::TempDir dir;
    const std::string bad_key = dir.str("bad_key.json");
    test_util::write_file(bad_key, R"({"synth_kind": "ar1", "lookbck": 8})");
    CHECK(run_cli("train --config " + bad_key) == 1);

    const std::string bad_value = dir.str("bad_value.json");
    test_util::write_file(bad_value, R"({"synth_kind": "ar1", "lr": "fast"})");
    CHECK(run_cli("train --config " + bad_value) == 1);

    const std::string not_json = dir.str("not_json.json");
    test_util::write_file(not_json, "lookback = 8\n");
    CHECK(run_cli("train --config " + not_json) == 1);
}

TEST_CASE("train produces run artifacts and honours the seed override") {
    test_util::TempDir dir;
    const std::string cfg = tiny_config(dir, "train.json");

    CHECK(run_cli("train --config " + cfg + " --quiet") == 0);
    CHECK(exists_under(dir.str("runs"), "report.csv"));
    CHECK(exists_under(dir.str("runs"), "checkpoint.txt"));
    CHECK(exists_under(dir.str("runs"), "summary.json"));
    CHECK(exists_under(dir.str("runs"), "seed0"));

    CHECK(run_cli("train --config " + cfg + " --quiet --seeds 3") == 0);
    CHECK(exists_under(dir.str("runs"), "seed3"));
}

TEST_CASE("numeric blowups exit with code 2") {
    test_util::TempDir dir;
    const std::string cfg = tiny_config(dir, "explode.json", ",\n  \"lr\": 1e200");
    CHECK(run_cli("train --config " + cfg + " --quiet") == 2);
}

TEST_CASE("synth writes the requested csv") {
    test_util::TempDir dir;
    const std::string cfg = tiny_config(dir, "synth.json");
    const std::string target = dir.str("data.csv");
    CHECK(run_cli("synth --config " + cfg + " --out " + target) == 0);
    CHECK(fs::exists(target));
    CHECK(fs::exists(target + ".meta.json"));
}

TEST_CASE("verify-theory writes its report and exits cleanly") {
    test_util::TempDir dir;
    CHECK(run_cli("verify-theory --out " + dir.str("theory") + " --quiet") == 0);
    CHECK(fs::exists(dir.str("theory") + "/theory_checks.txt"));
}

TEST_CASE("report digests a finished run") {
    test_util::TempDir dir;
    const std::string cfg = tiny_config(dir, "train.json");
    REQUIRE(run_cli("train --config " + cfg + " --quiet") == 0);

    const std::string out = dir.str("report_out");
    CHECK(run_cli("report " + dir.str("runs") + " --out " + out) == 0);
    CHECK(fs::exists(out + "/tidy.csv"));
    CHECK(fs::exists(out + "/val_mse.svg"));
    CHECK(fs::exists(out + "/train_total.svg"));

    CHECK(run_cli("report " + dir.str("no_such_dir") + " --out " + out) == 1);
}

TEST_CASE("ablate and the sweeps run end to end") {
    test_util::TempDir dir;
    const std::string cfg = tiny_config(dir, "ablate.json");

    CHECK(run_cli("ablate --config " + cfg + " --quiet") == 0);
    bool found_ablation = false;
    for (const auto& entry : fs::directory_iterator(dir.str("runs"))) {
        const std::string name = entry.path().filename().string();
        found_ablation = found_ablation || name.rfind("ablation_", 0) == 0;
    }
    CHECK(found_ablation);

    CHECK(run_cli("sweep-noise --config " + cfg + " --quiet") == 0);
    CHECK(run_cli("sweep-diff --config " + cfg + " --quiet") == 0);
}

} // TEST_SUITE
