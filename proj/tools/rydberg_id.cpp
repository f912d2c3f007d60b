#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rydberg_id/basis.hpp"
#include "rydberg_id/evaluation.hpp"
#include "rydberg_id/experiment.hpp"

using namespace rydberg_id;

namespace {

void print_accuracy_line(const std::string& task, ModelKind kind, const ConfusionMatrix& cm) {
    const auto ci = agresti_coull(cm.correct(), cm.total());
    std::cout << task << "  " << to_string(kind) << "  accuracy " << cm.accuracy() << "  (" << cm.correct() << "/"
              << cm.total() << ", 95% CI [" << ci.lower << ", " << ci.upper << "])\n";
}

void print_report(const ExperimentReport& r) {
    for (const auto& t : r.tasks) {
        for (const auto& m : t.models) {
            print_accuracy_line(t.label, m.kind, m.confusion);
            for (const auto& p : m.learning_curve) {
                std::cout << "    N=" << p.total_samples << "  cv " << p.mean << " +- " << p.std << '\n';
            }
        }
    }
    for (const auto& row : r.ablation_rows) {
        std::cout << to_string(r.ablation) << "=" << row.value << "  ";
        print_accuracy_line(row.task, row.model, row.confusion);
    }
    if (!r.numerics.empty()) {
        const auto& n = r.numerics_overall;
        std::cout << "numerics: trace drift " << n.trace_drift << ", hermiticity " << n.hermiticity << ", min eigenvalue "
                  << n.min_eigenvalue << ", step halving " << n.step_halving << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identify Rydberg atom configurations from simulated excitation profiles"};
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    auto* list_configs = app.add_subcommand("list-configs", "List catalog configurations");

    std::string basis_config;
    auto* list_basis = app.add_subcommand("list-basis", "Print the symmetrized basis of a configuration");
    list_basis->add_option("config", basis_config)->required();

    std::string profile_config, profile_out;
    int profile_points = 21;
    auto* profiles = app.add_subcommand("profiles", "Write fluctuation-free P_W(t) for every basis state");
    profiles->add_option("config", profile_config)->required();
    profiles->add_option("--points", profile_points)->check(CLI::IsMember({21, 201}));
    profiles->add_option("--out", profile_out)->required();

    std::string gen_cfg, gen_out;
    auto* generate = app.add_subcommand("generate", "Generate the dataset of the first task in a config");
    generate->add_option("config", gen_cfg)->required()->check(CLI::ExistingFile);
    generate->add_option("--out", gen_out, "Dataset CSV (default: <output>/<task>.csv)");

    std::string train_data, train_out, train_kind = "rfc";
    double train_fraction = 0.2;
    std::uint64_t train_seed = 20210728;
    auto* train = app.add_subcommand("train", "Train a model on the training split of a dataset");
    train->add_option("--data", train_data)->required()->check(CLI::ExistingFile);
    train->add_option("--model", train_kind)->check(CLI::IsMember({"svm", "rfc"}));
    train->add_option("--out", train_out)->required();
    train->add_option("--test-fraction", train_fraction, "Held-out share (0: train on everything)");
    train->add_option("--seed", train_seed);

    std::string eval_data, eval_model, eval_out;
    double eval_fraction = 0.2;
    std::uint64_t eval_seed = 20210728;
    auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on the test split of a dataset");
    evaluate->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", eval_out, "Report JSON; the confusion CSV goes next to it");
    evaluate->add_option("--test-fraction", eval_fraction, "Must match the value used for training (0: whole dataset)");
    evaluate->add_option("--seed", eval_seed);

    std::string run_cfg;
    auto* run = app.add_subcommand("run", "Run a full experiment");
    run->add_option("config", run_cfg)->required()->check(CLI::ExistingFile);

    std::string lc_cfg;
    auto* learning_curve = app.add_subcommand("learning-curve", "Cross-validated accuracy against sample count");
    learning_curve->add_option("config", lc_cfg)->required()->check(CLI::ExistingFile);

    std::string ablate_cfg, ablate_axis, ablate_values;
    auto* ablate = app.add_subcommand("ablate", "Accuracy along one ablation axis");
    ablate->add_option("config", ablate_cfg)->required()->check(CLI::ExistingFile);
    ablate->add_option("--axis", ablate_axis)
        ->required()
        ->check(CLI::IsMember({"interaction-mode", "noise-level", "total-time", "observe-every"}));
    ablate->add_option("--values", ablate_values, "Comma-separated axis values (default: the standard sweep)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list_configs) {
            for (const auto& e : configuration_catalog()) {
                const auto c = configuration_by_name(e.label);
                std::cout << e.label << "  " << e.description << ", " << c.count() << " atoms, " << c.edges.size() << " edges\n";
            }
        } else if (*list_basis) {
            const auto catalog = build_basis_catalog(configuration_by_name(basis_config), HamiltonianParams{}.blockade_radius());
            for (const auto& w : catalog.states) std::cout << format_state(w, catalog.atoms) << '\n';
        } else if (*profiles) {
            emit_profiles(profile_config, profile_points, profile_out);
            std::cout << "wrote " << profile_out << '\n';
        } else if (*generate) {
            const auto cfg = load_experiment_config(gen_cfg);
            const auto& entry = cfg.tasks.front();
            const auto ds = generate_dataset(entry.spec, {jobs, nullptr});
            if (gen_out.empty()) {
                std::filesystem::create_directories(cfg.output);
                gen_out = (std::filesystem::path(cfg.output) / (entry.label + ".csv")).string();
                for (char& ch : gen_out) {
                    if (ch == ':' || ch == '+') ch = '_';
                }
            }
            save_dataset(ds, gen_out);
            std::cout << "wrote " << ds.size() << " samples, " << ds.class_count() << " classes to " << gen_out << '\n';
        } else if (*train) {
            const auto ds = load_dataset(train_data);
            const auto part = train_fraction > 0.0 ? stratified_split(ds, train_fraction, train_seed).first : ds;
            ModelHyperparameters hp;
            hp.svm.seed = train_seed;
            hp.forest.seed = train_seed;
            hp.jobs = jobs;
            const auto model = train_model(parse_model_kind(train_kind), part, hp);
            save_model(model, train_out);
            std::cout << "trained " << train_kind << " on " << part.size() << " samples, wrote " << train_out << '\n';
        } else if (*evaluate) {
            const auto ds = load_dataset(eval_data);
            const auto part = eval_fraction > 0.0 ? stratified_split(ds, eval_fraction, eval_seed).second : ds;
            const auto model = load_model(eval_model);
            const auto cm = confusion_matrix(model, part);
            print_accuracy_line(eval_data, kind_of(model), cm);
            if (!eval_out.empty()) {
                const auto ci = agresti_coull(cm.correct(), cm.total());
                nlohmann::json j{{"format", "rydberg-id-evaluation"},
                                 {"version", 1},
                                 {"model", to_string(kind_of(model))},
                                 {"accuracy", cm.accuracy()},
                                 {"correct", cm.correct()},
                                 {"total", cm.total()},
                                 {"ci", to_json(ci)},
                                 {"confusion", to_json(cm)},
                                 {"classes", ds.class_names}};
                std::ofstream(eval_out) << j.dump(2) << '\n';
                write_confusion_csv(cm, ds.class_names, std::filesystem::path(eval_out).replace_extension(".confusion.csv").string());
            }
        } else if (*run) {
            const auto cfg = load_experiment_config(run_cfg);
            ProfileCache cache;
            print_report(run_experiment(cfg, {.jobs = jobs, .cache = &cache, .learning_curve = std::nullopt}));
        } else if (*learning_curve) {
            const auto cfg = load_experiment_config(lc_cfg);
            ProfileCache cache;
            print_report(run_experiment(cfg, {.jobs = jobs, .cache = &cache, .learning_curve = true, .ablation = false, .numerics = false}));
        } else if (*ablate) {
            auto cfg = load_experiment_config(ablate_cfg);
            cfg.ablation = parse_ablation_axis(ablate_axis);
            cfg.ablation_values = ablate_values.empty() ? default_ablation_values(cfg.ablation)
                                                        : detail::split(ablate_values, ',');
            validate(cfg);
            ProfileCache cache;
            ExperimentReport r;
            r.name = cfg.name;
            r.seed = cfg.seed;
            r.source = cfg.source;
            r.ablation = cfg.ablation;
            r.ablation_rows = run_ablation(cfg, cfg.ablation, cfg.ablation_values, {.jobs = jobs, .cache = &cache, .learning_curve = std::nullopt});
            std::filesystem::create_directories(cfg.output);
            write_report(r, (std::filesystem::path(cfg.output) / ("ablation-" + ablate_axis + ".json")).string());
            print_report(r);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
