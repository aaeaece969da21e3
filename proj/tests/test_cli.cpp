#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: " << path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* cli_path() {
    const char* exe = std::getenv("MIXPRO_CLI");
    REQUIRE_MESSAGE(exe != nullptr, "MIXPRO_CLI must point at the mixpro binary");
    return exe;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "mixpro_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// env_prefix lets a test override the environment, e.g. "MIXPRO_OUT=/x" or
// "--unset=MIXPRO_OUT" via env(1). MIXPRO_OUT is cleared by default so the
// --out flag is what's under test.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "env -u MIXPRO_OUT") {
    fs::path dir = fs::temp_directory_path() / "mixpro_cli_tests";
    fs::create_directories(dir);
    fs::path out_file = dir / "cmd.out";
    fs::path err_file = dir / "cmd.err";
    std::string cmd = env_prefix + " \"" + std::string(cli_path()) + "\" " + args + " > " +
                      out_file.string() + " 2> " + err_file.string();
    int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// Small-and-easy run setup: a separable task plus a model sized to fit it in
// a couple hundred optimizer steps on one core.
nlohmann::json tiny_config() {
    return {
        {"task_train_size", 8},   {"task_dev_size", 8},
        {"task_max_minority", 0}, {"hidden_dim", 16},
        {"num_layers", 1},        {"num_heads", 2},
        {"max_seq_length", 32},   {"learning_rate", 0.01},
        {"max_steps", 300},       {"batch_size", 2},
        {"grad_accumulation_steps", 2},
    };
}

fs::path write_config(const fs::path& dir, const nlohmann::json& patch) {
    nlohmann::json j = tiny_config();
    for (auto it = patch.begin(); it != patch.end(); ++it) j[it.key()] = it.value();
    fs::path path = dir / "config.json";
    std::ofstream(path) << j.dump(2) << "\n";
    return path;
}

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
    std::map<std::string, std::string> bytes;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            bytes[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
        }
    }
    return bytes;
}

}  // namespace

TEST_CASE("synth writes a reloadable task directory and reruns byte-identically") {
    fs::path dir = fresh_dir("synth");
    fs::path cfg = write_config(dir, {});
    fs::path task_dir = dir / "task";

    CliResult r = run_cli("synth --seed 1 --config " + cfg.string() + " --out " + task_dir.string());
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    for (const char* name : {"vocab.txt", "templates.txt", "templates_aug.txt", "rules.txt",
                             "train.jsonl", "dev.jsonl", "task.json", "synth_manifest.json"}) {
        CHECK_MESSAGE(fs::exists(task_dir / name), name);
    }

    nlohmann::json task_json = nlohmann::json::parse(slurp(task_dir / "task.json"));
    CHECK(task_json.at("format") == "mixpro-task");
    CHECK(task_json.at("seed") == 1);

    auto before = snapshot_dir(task_dir);
    CliResult again =
        run_cli("synth --seed 1 --config " + cfg.string() + " --out " + task_dir.string());
    CHECK(again.code == 0);
    CHECK(snapshot_dir(task_dir) == before);
}

TEST_CASE("synth train eval lifts train accuracy on a separable task") {
    fs::path dir = fresh_dir("pipeline");
    fs::path cfg = write_config(dir, {});
    fs::path task_dir = dir / "task";
    fs::path train_dir = dir / "train";
    fs::path eval_dir = dir / "eval";

    REQUIRE(run_cli("synth --seed 1 --config " + cfg.string() + " --out " + task_dir.string()).code ==
            0);

    CliResult tr = run_cli("train --task " + task_dir.string() + " --config " + cfg.string() +
                           " --seed 3 --out " + train_dir.string());
    CHECK(tr.code == 0);
    CHECK(fs::exists(train_dir / "checkpoint.json"));
    CHECK(fs::exists(train_dir / "train_log.jsonl"));
    CHECK(fs::exists(train_dir / "train_manifest.json"));

    CliResult ev = run_cli("eval --task " + task_dir.string() + " --checkpoint " +
                           (train_dir / "checkpoint.json").string() + " --split train --out " +
                           eval_dir.string());
    CHECK(ev.code == 0);
    nlohmann::json metrics = nlohmann::json::parse(slurp(eval_dir / "metrics.json"));
    CHECK(metrics.at("split") == "train");
    CHECK(metrics.at("n") == 8);
    CHECK(metrics.at("accuracy").get<double>() == 1.0);

    auto before = snapshot_dir(eval_dir);
    CliResult again = run_cli("eval --task " + task_dir.string() + " --checkpoint " +
                              (train_dir / "checkpoint.json").string() + " --split train --out " +
                              eval_dir.string());
    CHECK(again.code == 0);
    CHECK(snapshot_dir(eval_dir) == before);
}

TEST_CASE("augment dumps one preserving and one flipping row per sample") {
    fs::path dir = fresh_dir("augment");
    fs::path cfg = write_config(dir, {});
    fs::path task_dir = dir / "task";
    fs::path aug_dir = dir / "aug";

    REQUIRE(run_cli("synth --seed 2 --config " + cfg.string() + " --out " + task_dir.string()).code ==
            0);
    CliResult r =
        run_cli("augment --task " + task_dir.string() + " --seed 5 --out " + aug_dir.string());
    CHECK(r.code == 0);

    std::ifstream in(aug_dir / "pairs.jsonl");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json row = nlohmann::json::parse(line);
        int y_orig = row.at("y_orig").get<int>();
        int y_aug = row.at("y_aug").get<int>();
        std::string mode = row.at("mode").get<std::string>();
        if (mode == "preserving") {
            CHECK(y_aug == y_orig);
        } else {
            CHECK(mode == "flipping");
            CHECK(y_aug == 1 - y_orig);
        }
        CHECK_FALSE(row.at("aug_tokens").empty());
        ++rows;
    }
    CHECK(rows == 2 * 8);

    std::string before = slurp(aug_dir / "pairs.jsonl");
    REQUIRE(run_cli("augment --task " + task_dir.string() + " --seed 5 --out " + aug_dir.string())
                .code == 0);
    CHECK(slurp(aug_dir / "pairs.jsonl") == before);
}

TEST_CASE("ablate writes a complete grid and report regenerates plot data") {
    fs::path dir = fresh_dir("ablate");
    fs::path cfg = write_config(dir, {{"max_steps", 30}});
    fs::path task_dir = dir / "task";
    fs::path run_dir = dir / "run";
    fs::path plot_dir = dir / "plot";

    REQUIRE(run_cli("synth --seed 1 --config " + cfg.string() + " --out " + task_dir.string()).code ==
            0);
    CliResult r = run_cli("ablate --task " + task_dir.string() + " --config " + cfg.string() +
                          " --variants full,no-aug-PET --seeds 1,2,3,4,5 --out " + run_dir.string());
    CHECK(r.code == 0);

    std::ifstream csv(run_dir / "report.csv");
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    REQUIRE(lines.size() == 1 + 10 + 4);  // header, cells, mean and std per variant
    CHECK(lines[0] == "variant,seed,accuracy,macro_f1,final_loss");

    nlohmann::json report = nlohmann::json::parse(slurp(run_dir / "report.json"));
    CHECK(report.at("cells").size() == 10);
    CHECK(report.at("aggregates").size() == 2);

    CliResult plot = run_cli("report --in " + (run_dir / "report.json").string() + " --out " +
                             plot_dir.string());
    CHECK(plot.code == 0);
    std::string plot_csv = slurp(plot_dir / "plot_accuracy.csv");
    CHECK(plot_csv.rfind("variant,accuracy_mean,accuracy_std\n", 0) == 0);
    nlohmann::json plot_json = nlohmann::json::parse(slurp(plot_dir / "plot_accuracy.json"));
    CHECK(plot_json.at("variants").size() == 2);
}

TEST_CASE("MIXPRO_OUT supplies the output directory when --out is absent") {
    fs::path dir = fresh_dir("envout");
    fs::path cfg = write_config(dir, {});
    fs::path task_dir = dir / "task";

    CliResult r = run_cli("synth --seed 1 --config " + cfg.string(),
                          "env MIXPRO_OUT=" + task_dir.string());
    CHECK(r.code == 0);
    CHECK(fs::exists(task_dir / "task.json"));
}

TEST_CASE("bad invocations exit nonzero naming the cause") {
    fs::path dir = fresh_dir("errors");
    fs::path task_dir = dir / "task";
    fs::path cfg = write_config(dir, {});
    REQUIRE(run_cli("synth --seed 1 --config " + cfg.string() + " --out " + task_dir.string()).code ==
            0);

    CliResult no_out = run_cli("synth --seed 1");
    CHECK(no_out.code != 0);
    CHECK(no_out.err.find("no output directory") != std::string::npos);

    fs::path bad_cfg = dir / "bad_config.json";
    std::ofstream(bad_cfg) << "{\"learning_rte\": 0.1}\n";
    CliResult bad = run_cli("synth --seed 1 --config " + bad_cfg.string() + " --out " +
                            (dir / "x").string());
    CHECK(bad.code != 0);
    CHECK(bad.err.find("unknown key") != std::string::npos);

    fs::path train_dir = dir / "train";
    nlohmann::json fast = {{"max_steps", 1}};
    fs::path fast_cfg = write_config(dir, fast);
    REQUIRE(run_cli("train --task " + task_dir.string() + " --config " + fast_cfg.string() +
                    " --out " + train_dir.string())
                .code == 0);
    std::string ckpt = (train_dir / "checkpoint.json").string();

    CliResult bad_split = run_cli("eval --task " + task_dir.string() + " --checkpoint " + ckpt +
                                  " --split bogus --out " + (dir / "e1").string());
    CHECK(bad_split.code != 0);
    CHECK(bad_split.err.find("split") != std::string::npos);

    CliResult bad_tmpl = run_cli("eval --task " + task_dir.string() + " --checkpoint " + ckpt +
                                 " --template 99 --out " + (dir / "e2").string());
    CHECK(bad_tmpl.code != 0);

    CliResult bad_variant =
        run_cli("train --task " + task_dir.string() + " --config " + fast_cfg.string() +
                " --variant nonsense --out " + (dir / "t2").string());
    CHECK(bad_variant.code != 0);
    CHECK(bad_variant.err.find("variant") != std::string::npos);
}
