#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixpro/ablation.hpp"
#include "mixpro/augment.hpp"
#include "mixpro/config.hpp"
#include "mixpro/eval.hpp"
#include "mixpro/manifest.hpp"
#include "mixpro/task.hpp"
#include "mixpro/train.hpp"

namespace {

using namespace mixpro;

namespace fs = std::filesystem;

std::string resolve_out_dir(const std::string& out_flag) {
    if (!out_flag.empty()) return out_flag;
    const char* env = std::getenv("MIXPRO_OUT");
    if (env != nullptr && *env != '\0') return env;
    throw std::runtime_error("no output directory: pass --out or set MIXPRO_OUT");
}

std::string ensure_out_dir(const std::string& out_flag) {
    std::string dir = resolve_out_dir(out_flag);
    fs::create_directories(dir);
    return dir;
}

FlatConfig load_config_opt(const std::string& path) {
    return path.empty() ? FlatConfig{} : FlatConfig::load(path);
}

void write_samples_jsonl(const std::vector<TrainSample>& samples, const std::string& path) {
    std::ostringstream out;
    for (const TrainSample& s : samples) {
        nlohmann::json j;
        j["label"] = s.label;
        j["tokens"] = s.tokens;
        out << j.dump() << '\n';
    }
    atomic_write_file(path, out.str());
}

std::vector<TrainSample> read_samples_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<TrainSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        TrainSample s;
        s.label = j.at("label").get<int>();
        s.tokens = j.at("tokens").get<std::vector<int>>();
        out.push_back(std::move(s));
    }
    return out;
}

void write_task_dir(const SyntheticTask& task, std::uint64_t seed, const std::string& dir) {
    task.vocab.save(dir + "/vocab.txt");
    save_templates(task.templates, dir + "/templates.txt");
    save_templates(task.templates_aug, dir + "/templates_aug.txt");
    task.rules.save(dir + "/rules.txt", task.vocab);
    write_samples_jsonl(task.train, dir + "/train.jsonl");
    write_samples_jsonl(task.dev, dir + "/dev.jsonl");

    nlohmann::json j;
    j["format"] = "mixpro-task";
    j["format_version"] = 1;
    j["seed"] = seed;
    j["spec"] = {{"positive_words", task.spec.positive_words},
                 {"negative_words", task.spec.negative_words},
                 {"filler_words", task.spec.filler_words},
                 {"min_sentence_len", task.spec.min_sentence_len},
                 {"max_sentence_len", task.spec.max_sentence_len},
                 {"train_size", task.spec.train_size},
                 {"dev_size", task.spec.dev_size},
                 {"label_count", task.spec.label_count},
                 {"template_count", task.spec.template_count},
                 {"max_minority", task.spec.max_minority}};
    nlohmann::json verbalizer = nlohmann::json::object();
    for (const auto& kv : task.verbalizer.word_to_label()) {
        verbalizer[task.vocab.token(kv.first)] = kv.second;
    }
    j["verbalizer"] = verbalizer;
    atomic_write_file(dir + "/task.json", j.dump(2) + "\n");
}

SyntheticTask load_task_dir(const std::string& dir) {
    std::ifstream in(dir + "/task.json");
    if (!in) throw std::runtime_error("cannot open " + dir + "/task.json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(dir + "/task.json: " + e.what());
    }
    if (j.value("format", "") != "mixpro-task" || j.value("format_version", 0) != 1) {
        throw std::runtime_error(dir + "/task.json is not a known task format");
    }
    SyntheticTask task;
    const nlohmann::json& spec = j.at("spec");
    task.spec.positive_words = spec.at("positive_words").get<std::vector<std::string>>();
    task.spec.negative_words = spec.at("negative_words").get<std::vector<std::string>>();
    task.spec.filler_words = spec.at("filler_words").get<std::vector<std::string>>();
    task.spec.min_sentence_len = spec.at("min_sentence_len").get<std::size_t>();
    task.spec.max_sentence_len = spec.at("max_sentence_len").get<std::size_t>();
    task.spec.train_size = spec.at("train_size").get<std::size_t>();
    task.spec.dev_size = spec.at("dev_size").get<std::size_t>();
    task.spec.label_count = spec.at("label_count").get<int>();
    task.spec.template_count = spec.at("template_count").get<std::size_t>();
    task.spec.max_minority = spec.at("max_minority").get<std::size_t>();

    task.vocab = Vocab::load(dir + "/vocab.txt");
    task.templates = load_templates(dir + "/templates.txt");
    task.templates_aug = load_templates(dir + "/templates_aug.txt");
    task.rules = LexiconRules::load_file(dir + "/rules.txt", task.vocab);
    task.train = read_samples_jsonl(dir + "/train.jsonl");
    task.dev = read_samples_jsonl(dir + "/dev.jsonl");

    for (const auto& item : j.at("verbalizer").items()) {
        int word = task.vocab.find(item.key());
        if (word == -1) {
            throw std::runtime_error("task verbalizer word \"" + item.key() + "\" is not in the vocabulary");
        }
        task.verbalizer.add(word, item.value().get<int>());
    }
    auto resolve_ids = [&](const std::vector<std::string>& words, std::vector<int>& ids) {
        for (const std::string& w : words) {
            int id = task.vocab.find(w);
            if (id == -1) throw std::runtime_error("task word \"" + w + "\" is not in the vocabulary");
            ids.push_back(id);
        }
    };
    resolve_ids(task.spec.positive_words, task.positive_ids);
    resolve_ids(task.spec.negative_words, task.negative_ids);
    return task;
}

TrainInputs build_train_inputs(const SyntheticTask& task, const VariantSpec& spec,
                               std::uint64_t seed) {
    TrainInputs inputs;
    inputs.train = task.train;
    inputs.templates = task.templates;
    inputs.templates_aug = task.templates_aug;
    inputs.vocab = &task.vocab;
    inputs.label_count = task.spec.label_count;
    if (spec.text_aug && !spec.plain_pet && !spec.mixup.enable_vanilla_baseline) {
        std::vector<std::vector<int>> texts;
        texts.reserve(task.train.size());
        for (const TrainSample& s : task.train) texts.push_back(s.tokens);
        RunAugmentations aug = generate_run_augmentations(texts, task.rules, seed);
        inputs.aug_preserving = std::move(aug.preserving);
        inputs.aug_flipping = std::move(aug.flipping);
    }
    return inputs;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int run_synth(std::uint64_t seed, const std::string& config_path, const std::string& out_flag) {
    FlatConfig config = load_config_opt(config_path);
    std::string dir = ensure_out_dir(out_flag);
    SyntheticTask task = gen_synthetic_task(config.task_spec(), seed);
    write_task_dir(task, seed, dir);

    RunManifest manifest;
    manifest.command = "synth";
    manifest.config_hash = config.hash();
    manifest.seeds = {seed};
    if (!config_path.empty()) manifest.input_paths.push_back(config_path);
    manifest.out_dir = dir;
    manifest.write(dir + "/synth_manifest.json");
    std::cout << "task written to " << dir << " (" << task.train.size() << " train, "
              << task.dev.size() << " dev, " << task.templates.size() << " templates)\n";
    return 0;
}

int run_augment(const std::string& task_dir, std::uint64_t seed, const std::string& out_flag) {
    SyntheticTask task = load_task_dir(task_dir);
    std::string dir = ensure_out_dir(out_flag);
    std::vector<std::vector<int>> texts;
    texts.reserve(task.train.size());
    for (const TrainSample& s : task.train) texts.push_back(s.tokens);
    RunAugmentations aug = generate_run_augmentations(texts, task.rules, seed);

    std::ostringstream out;
    for (std::size_t i = 0; i < task.train.size(); ++i) {
        for (AugMode mode : {AugMode::preserving, AugMode::flipping}) {
            bool preserving = mode == AugMode::preserving;
            nlohmann::json j;
            j["index"] = i;
            j["mode"] = to_string(mode);
            j["orig_tokens"] = task.train[i].tokens;
            j["aug_tokens"] = preserving ? aug.preserving[i] : aug.flipping[i];
            j["y_orig"] = task.train[i].label;
            j["y_aug"] = preserving ? task.train[i].label : 1 - task.train[i].label;
            out << j.dump() << '\n';
        }
    }
    atomic_write_file(dir + "/pairs.jsonl", out.str());

    RunManifest manifest;
    manifest.command = "augment";
    manifest.seeds = {seed};
    manifest.input_paths = {task_dir};
    manifest.out_dir = dir;
    manifest.write(dir + "/augment_manifest.json");
    std::cout << "wrote " << 2 * task.train.size() << " augmentation pairs to " << dir << "\n";
    return 0;
}

int run_train(const std::string& task_dir, const std::string& config_path, std::int64_t seed_flag,
              const std::string& variant_name, const std::string& out_flag) {
    auto started = std::chrono::steady_clock::now();
    SyntheticTask task = load_task_dir(task_dir);
    FlatConfig config = load_config_opt(config_path);
    if (seed_flag >= 0) config.seed = static_cast<std::uint64_t>(seed_flag);
    std::string dir = ensure_out_dir(out_flag);

    VariantSpec spec = variant_name.empty() ? config.flag_variant()
                                            : variant_spec(variant_from_string(variant_name),
                                                           config.mixup_alpha);
    TrainInputs inputs = build_train_inputs(task, spec, config.seed);
    TrainResult result = train(inputs, config.model_config(), config.training_config(), spec);

    save_checkpoint(result.params, dir + "/checkpoint.json");
    std::ostringstream log;
    for (const LogEntry& e : result.log) {
        nlohmann::json j;
        j["step"] = e.step;
        j["epoch"] = e.epoch;
        j["template_index"] = e.template_index;
        j["lambda_mean"] = e.lambda_mean;
        j["loss"] = e.loss;
        log << j.dump() << '\n';
    }
    atomic_write_file(dir + "/train_log.jsonl", log.str());

    RunManifest manifest;
    manifest.command = "train";
    manifest.config_hash = config.hash();
    manifest.seeds = {config.seed};
    manifest.input_paths = {task_dir};
    if (!config_path.empty()) manifest.input_paths.push_back(config_path);
    manifest.out_dir = dir;
    manifest.extra["variant"] = variant_name.empty() ? "(config flags)" : variant_name;
    manifest.write(dir + "/train_manifest.json");

    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    std::cout << "trained " << result.params.parameter_count() << " parameters for "
              << result.log.size() << " steps in " << elapsed.count() << " s\n";
    return 0;
}

int run_eval(const std::string& task_dir, const std::string& checkpoint_path,
             const std::string& split, std::size_t template_index, const std::string& out_flag) {
    SyntheticTask task = load_task_dir(task_dir);
    if (split != "train" && split != "dev") {
        throw std::runtime_error("--split must be train or dev, got \"" + split + "\"");
    }
    if (template_index >= task.templates.size()) {
        throw std::runtime_error("--template " + std::to_string(template_index) +
                                 " out of range, task has " + std::to_string(task.templates.size()));
    }
    ModelParams params = load_checkpoint(checkpoint_path);
    std::string dir = ensure_out_dir(out_flag);
    const std::vector<TrainSample>& data = split == "train" ? task.train : task.dev;
    EvalMetrics metrics = evaluate(params, data, task.templates[template_index], task.vocab);

    nlohmann::json j;
    j["engine_version"] = kEngineVersion;
    j["split"] = split;
    j["template_index"] = template_index;
    j["accuracy"] = metrics.accuracy;
    j["macro_f1"] = metrics.macro_f1;
    j["n"] = metrics.n;
    j["forward_passes"] = metrics.forward_passes;
    atomic_write_file(dir + "/metrics.json", j.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "eval";
    manifest.input_paths = {task_dir, checkpoint_path};
    manifest.out_dir = dir;
    manifest.extra["split"] = split;
    manifest.extra["template_index"] = template_index;
    manifest.write(dir + "/eval_manifest.json");
    std::cout << split << " accuracy " << format_double(metrics.accuracy) << ", macro F1 "
              << format_double(metrics.macro_f1) << " over " << metrics.n << " examples\n";
    return 0;
}

int run_ablate(const std::string& task_dir, const std::string& config_path,
               const std::string& variants_csv, const std::string& seeds_csv, std::size_t jobs,
               const std::string& out_flag) {
    auto started = std::chrono::steady_clock::now();
    SyntheticTask task = load_task_dir(task_dir);
    FlatConfig config = load_config_opt(config_path);
    std::string dir = ensure_out_dir(out_flag);

    std::vector<Variant> variants;
    for (const std::string& name : split_list(variants_csv)) {
        variants.push_back(variant_from_string(name));
    }
    std::vector<std::uint64_t> seeds;
    for (const std::string& s : split_list(seeds_csv)) {
        seeds.push_back(static_cast<std::uint64_t>(std::stoull(s)));
    }

    RunReport report =
        run_ablation(task, config.model_config(), config.training_config(), variants, seeds, jobs);

    RunManifest manifest;
    manifest.command = "ablate";
    manifest.config_hash = config.hash();
    manifest.seeds = seeds;
    manifest.input_paths = {task_dir};
    if (!config_path.empty()) manifest.input_paths.push_back(config_path);
    manifest.out_dir = dir;
    manifest.extra["variants"] = split_list(variants_csv);
    write_report_csv(report, dir + "/report.csv");
    write_report_json(report, manifest, dir + "/report.json");
    manifest.write(dir + "/ablate_manifest.json");

    for (const VariantAggregate& a : report.aggregates) {
        std::cout << a.variant << ": accuracy " << format_double(a.accuracy_mean) << " +- "
                  << format_double(a.accuracy_std) << ", macro F1 " << format_double(a.macro_f1_mean)
                  << " over " << a.seeds << " seeds\n";
    }
    for (const CellResult& c : report.cells) {
        if (c.error.empty()) {
            std::cout << "model parameters: " << c.param_count << "\n";
            break;
        }
    }
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    std::cout << "ablation wall clock: " << elapsed.count() << " s\n";

    std::vector<std::string> failures = report.failures();
    for (const std::string& f : failures) std::cerr << "cell failed: " << f << "\n";
    return failures.empty() ? 0 : 1;
}

int run_report(const std::string& in_path, const std::string& out_flag) {
    RunReport report = load_report_json(in_path);
    std::string dir = ensure_out_dir(out_flag);
    write_plot_data(report, dir + "/plot_accuracy.csv", dir + "/plot_accuracy.json");

    RunManifest manifest;
    manifest.command = "report";
    manifest.input_paths = {in_path};
    manifest.out_dir = dir;
    manifest.write(dir + "/report_manifest.json");
    std::cout << "plot data for " << report.aggregates.size() << " variants written to " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Three-level mixup training for few-shot prompt classification"};
    app.require_subcommand(1);

    std::string out_flag, config_path, task_dir, checkpoint_path;
    std::string variant_name, variants_csv, seeds_csv, split = "dev", report_in;
    std::uint64_t seed = 1;
    std::int64_t seed_flag = -1;
    std::size_t template_index = 0, jobs = 1;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic task directory");
    synth->add_option("--seed", seed, "Task generation seed");
    synth->add_option("--config", config_path, "JSON config file (task_* keys)");
    synth->add_option("--out", out_flag, "Output directory (or MIXPRO_OUT)");

    CLI::App* augment = app.add_subcommand("augment", "Dump the augmentation pairs a run trains on");
    augment->add_option("--task", task_dir, "Task directory from synth")->required();
    augment->add_option("--seed", seed, "Run seed (matches train --seed)");
    augment->add_option("--out", out_flag, "Output directory (or MIXPRO_OUT)");

    CLI::App* train_cmd = app.add_subcommand("train", "Train one model");
    train_cmd->add_option("--task", task_dir, "Task directory from synth")->required();
    train_cmd->add_option("--config", config_path, "JSON config file");
    train_cmd->add_option("--seed", seed_flag, "Run seed (overrides config)");
    train_cmd->add_option("--variant", variant_name,
                          "full, w/o-token, w/o-sent, w/o-tmpl, w/o-text-aug, w/o-template-aug, "
                          "vanilla-mixup, or no-aug-PET (default: config flags)");
    train_cmd->add_option("--out", out_flag, "Output directory (or MIXPRO_OUT)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--task", task_dir, "Task directory from synth")->required();
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint.json from train")->required();
    eval_cmd->add_option("--split", split, "train or dev");
    eval_cmd->add_option("--template", template_index, "Template index for single-model inference");
    eval_cmd->add_option("--out", out_flag, "Output directory (or MIXPRO_OUT)");

    CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate a variant x seed grid");
    ablate->add_option("--task", task_dir, "Task directory from synth")->required();
    ablate->add_option("--config", config_path, "JSON config file");
    ablate->add_option("--variants", variants_csv, "Comma-separated variant names")->required();
    ablate->add_option("--seeds", seeds_csv, "Comma-separated run seeds")->required();
    ablate->add_option("--jobs", jobs, "Worker threads for independent cells");
    ablate->add_option("--out", out_flag, "Output directory (or MIXPRO_OUT)");

    CLI::App* report = app.add_subcommand("report", "Turn report.json into plot-ready data");
    report->add_option("--in", report_in, "report.json from ablate")->required();
    report->add_option("--out", out_flag, "Output directory (or MIXPRO_OUT)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(seed, config_path, out_flag);
        if (augment->parsed()) return run_augment(task_dir, seed, out_flag);
        if (train_cmd->parsed()) {
            return run_train(task_dir, config_path, seed_flag, variant_name, out_flag);
        }
        if (eval_cmd->parsed()) {
            return run_eval(task_dir, checkpoint_path, split, template_index, out_flag);
        }
        if (ablate->parsed()) {
            return run_ablate(task_dir, config_path, variants_csv, seeds_csv, jobs, out_flag);
        }
        if (report->parsed()) return run_report(report_in, out_flag);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
