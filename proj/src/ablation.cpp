#include "mixpro/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mixpro/eval.hpp"

namespace mixpro {

namespace {

// Welford over one metric stream; sample std with n-1.
struct Running {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double std() const { return n < 2 ? 0.0 : std::sqrt(m2 / static_cast<double>(n - 1)); }
};

}  // namespace

std::vector<std::string> RunReport::failures() const {
    std::vector<std::string> out;
    for (const CellResult& c : cells) {
        if (!c.error.empty()) {
            out.push_back(c.variant + " seed " + std::to_string(c.seed) + ": " + c.error);
        }
    }
    return out;
}

const VariantAggregate& RunReport::aggregate(const std::string& variant) const {
    for (const VariantAggregate& a : aggregates) {
        if (a.variant == variant) return a;
    }
    throw std::invalid_argument("RunReport: no aggregate for variant \"" + variant + "\"");
}

CellResult run_cell(const SyntheticTask& task, const ModelConfig& model_config,
                    const TrainingConfig& base_config, Variant variant, std::uint64_t seed) {
    CellResult cell;
    cell.variant = to_string(variant);
    cell.seed = seed;

    TrainingConfig config = base_config;
    config.seed = seed;
    VariantSpec spec = variant_spec(variant, config.mixup_alpha);

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

    TrainResult trained = train(inputs, model_config, config, spec);
    cell.final_loss = trained.log.empty() ? 0.0 : trained.log.back().loss;
    cell.template_usage = trained.schedule.usage;
    cell.param_count = trained.params.parameter_count();

    double acc_sum = 0.0, f1_sum = 0.0;
    for (const Template& tmpl : task.templates) {
        EvalMetrics m = evaluate(trained.params, task.dev, tmpl, task.vocab, &cell.forward_passes);
        cell.per_template_accuracy.push_back(m.accuracy);
        acc_sum += m.accuracy;
        f1_sum += m.macro_f1;
    }
    cell.accuracy = acc_sum / static_cast<double>(task.templates.size());
    cell.macro_f1 = f1_sum / static_cast<double>(task.templates.size());
    return cell;
}

RunReport run_ablation(const SyntheticTask& task, const ModelConfig& model_config,
                       const TrainingConfig& base_config, const std::vector<Variant>& variants,
                       const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    if (variants.empty()) throw std::invalid_argument("run_ablation: no variants");
    if (seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
    struct CellSpec {
        Variant variant;
        std::uint64_t seed;
    };
    std::vector<CellSpec> specs;
    specs.reserve(variants.size() * seeds.size());
    for (Variant v : variants) {
        for (std::uint64_t s : seeds) specs.push_back({v, s});
    }

    RunReport report;
    report.cells.resize(specs.size());
    auto work_one = [&](std::size_t i) {
        try {
            report.cells[i] = run_cell(task, model_config, base_config, specs[i].variant, specs[i].seed);
        } catch (const std::exception& e) {
            report.cells[i].variant = to_string(specs[i].variant);
            report.cells[i].seed = specs[i].seed;
            report.cells[i].error = e.what();
        }
    };

    std::size_t workers = std::min(jobs == 0 ? std::size_t{1} : jobs, specs.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) work_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1)) {
                    work_one(i);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    for (Variant v : variants) {
        VariantAggregate agg;
        agg.variant = to_string(v);
        Running acc, f1, loss;
        for (const CellResult& c : report.cells) {
            if (c.variant != agg.variant || !c.error.empty()) continue;
            acc.add(c.accuracy);
            f1.add(c.macro_f1);
            loss.add(c.final_loss);
        }
        agg.seeds = acc.n;
        agg.accuracy_mean = acc.mean;
        agg.accuracy_std = acc.std();
        agg.macro_f1_mean = f1.mean;
        agg.macro_f1_std = f1.std();
        agg.final_loss_mean = loss.mean;
        agg.final_loss_std = loss.std();
        report.aggregates.push_back(agg);
    }
    return report;
}

std::string format_double(double value) {
    nlohmann::json j = value;
    return j.dump();
}

void write_report_csv(const RunReport& report, const std::string& path) {
    std::ostringstream out;
    out << "variant,seed,accuracy,macro_f1,final_loss\n";
    for (const CellResult& c : report.cells) {
        if (!c.error.empty()) continue;
        out << c.variant << ',' << c.seed << ',' << format_double(c.accuracy) << ','
            << format_double(c.macro_f1) << ',' << format_double(c.final_loss) << '\n';
    }
    for (const VariantAggregate& a : report.aggregates) {
        out << a.variant << ",mean," << format_double(a.accuracy_mean) << ','
            << format_double(a.macro_f1_mean) << ',' << format_double(a.final_loss_mean) << '\n';
        out << a.variant << ",std," << format_double(a.accuracy_std) << ','
            << format_double(a.macro_f1_std) << ',' << format_double(a.final_loss_std) << '\n';
    }
    atomic_write_file(path, out.str());
}

namespace {

nlohmann::json cell_to_json(const CellResult& c) {
    nlohmann::json j;
    j["variant"] = c.variant;
    j["seed"] = c.seed;
    if (!c.error.empty()) {
        j["error"] = c.error;
        return j;
    }
    j["accuracy"] = c.accuracy;
    j["macro_f1"] = c.macro_f1;
    j["final_loss"] = c.final_loss;
    j["per_template_accuracy"] = c.per_template_accuracy;
    j["forward_passes"] = c.forward_passes;
    j["template_usage"] = c.template_usage;
    j["param_count"] = c.param_count;
    return j;
}

nlohmann::json aggregate_to_json(const VariantAggregate& a) {
    nlohmann::json j;
    j["variant"] = a.variant;
    j["seeds"] = a.seeds;
    j["accuracy_mean"] = a.accuracy_mean;
    j["accuracy_std"] = a.accuracy_std;
    j["macro_f1_mean"] = a.macro_f1_mean;
    j["macro_f1_std"] = a.macro_f1_std;
    j["final_loss_mean"] = a.final_loss_mean;
    j["final_loss_std"] = a.final_loss_std;
    return j;
}

}  // namespace

void write_report_json(const RunReport& report, const RunManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["manifest"] = manifest.to_json();
    j["cells"] = nlohmann::json::array();
    for (const CellResult& c : report.cells) j["cells"].push_back(cell_to_json(c));
    j["aggregates"] = nlohmann::json::array();
    for (const VariantAggregate& a : report.aggregates) j["aggregates"].push_back(aggregate_to_json(a));
    atomic_write_file(path, j.dump(2) + "\n");
}

RunReport load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_report_json: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("load_report_json: " + path + ": " + e.what());
    }
    RunReport report;
    for (const nlohmann::json& cj : j.at("cells")) {
        CellResult c;
        c.variant = cj.at("variant").get<std::string>();
        c.seed = cj.at("seed").get<std::uint64_t>();
        if (cj.contains("error")) {
            c.error = cj.at("error").get<std::string>();
        } else {
            c.accuracy = cj.at("accuracy").get<double>();
            c.macro_f1 = cj.at("macro_f1").get<double>();
            c.final_loss = cj.at("final_loss").get<double>();
            c.per_template_accuracy = cj.at("per_template_accuracy").get<std::vector<double>>();
            c.forward_passes = cj.at("forward_passes").get<std::int64_t>();
            c.template_usage = cj.at("template_usage").get<std::vector<std::int64_t>>();
            c.param_count = cj.at("param_count").get<std::size_t>();
        }
        report.cells.push_back(std::move(c));
    }
    for (const nlohmann::json& aj : j.at("aggregates")) {
        VariantAggregate a;
        a.variant = aj.at("variant").get<std::string>();
        a.seeds = aj.at("seeds").get<std::size_t>();
        a.accuracy_mean = aj.at("accuracy_mean").get<double>();
        a.accuracy_std = aj.at("accuracy_std").get<double>();
        a.macro_f1_mean = aj.at("macro_f1_mean").get<double>();
        a.macro_f1_std = aj.at("macro_f1_std").get<double>();
        a.final_loss_mean = aj.at("final_loss_mean").get<double>();
        a.final_loss_std = aj.at("final_loss_std").get<double>();
        report.aggregates.push_back(std::move(a));
    }
    return report;
}

void write_plot_data(const RunReport& report, const std::string& csv_path,
                     const std::string& json_path) {
    std::ostringstream csv;
    csv << "variant,accuracy_mean,accuracy_std\n";
    nlohmann::json rows = nlohmann::json::array();
    for (const VariantAggregate& a : report.aggregates) {
        csv << a.variant << ',' << format_double(a.accuracy_mean) << ','
            << format_double(a.accuracy_std) << '\n';
        rows.push_back({{"variant", a.variant},
                        {"accuracy_mean", a.accuracy_mean},
                        {"accuracy_std", a.accuracy_std}});
    }
    atomic_write_file(csv_path, csv.str());
    atomic_write_file(json_path, nlohmann::json{{"variants", rows}}.dump(2) + "\n");
}

}  // namespace mixpro
