// Command-line driver for the RIS-assisted MU-MIMO sweep harness.
//
// Subcommands:
//   run              evaluate an experiment spec and write result CSVs
//   train            train agent checkpoints for an experiment spec
//   report           turn a results CSV into a plot-ready CSV and a table
//   validate-config  parse and check a spec (or a bare system config)

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "risfarm/harness.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

risfarm::ExperimentSpec load_spec(const std::string& spec_path, const std::string& preset,
                                  std::uint64_t seed_override, bool have_seed,
                                  const std::string& out_override) {
    risfarm::ExperimentSpec spec;
    if (!spec_path.empty()) {
        spec = risfarm::parse_experiment_spec(read_file(spec_path));
    } else if (preset == "desk") {
        spec = risfarm::desk_preset();
    } else if (preset == "table1") {
        spec = risfarm::table1_preset();
    } else {
        throw std::runtime_error("either --spec <file> or --preset {desk,table1} is required");
    }
    if (have_seed) spec.master_seed = seed_override;
    if (!out_override.empty()) spec.output_dir = out_override;
    return spec;
}

int fail_json(const std::exception& e) {
    nlohmann::json j;
    j["error"] = e.what();
    std::cerr << j.dump() << std::endl;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RIS-assisted MU-MIMO simulation and benchmark harness"};
    app.require_subcommand(1);

    std::string spec_path, preset, out_dir, results_path, config_path;
    std::uint64_t seed = 0;
    bool have_seed = false;
    int threads = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--spec", spec_path, "experiment spec JSON file");
        sub->add_option("--preset", preset, "built-in spec: desk or table1")
            ->check(CLI::IsMember({"desk", "table1"}));
        sub->add_option("--seed", seed, "override the master seed")
            ->each([&](const std::string&) { have_seed = true; });
        sub->add_option("--out", out_dir, "override the output directory");
        sub->add_option("--threads", threads, "parallel realizations per sweep cell");
    };

    CLI::App* run = app.add_subcommand("run", "evaluate a sweep and write result CSVs");
    add_common(run);

    CLI::App* train = app.add_subcommand("train", "train agent checkpoints for a spec");
    add_common(train);

    CLI::App* report = app.add_subcommand("report", "render a results CSV");
    report->add_option("--results", results_path, "results CSV produced by run")->required();
    report->add_option("--out", out_dir, "directory for the plot-ready CSV");

    CLI::App* validate = app.add_subcommand("validate-config", "check a spec or system config");
    validate->add_option("--spec", spec_path, "experiment spec JSON file");
    validate->add_option("--config", config_path, "bare SystemConfig JSON file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto spec = load_spec(spec_path, preset, seed, have_seed, out_dir);
            if (spec.train_inline) risfarm::train_agents(spec);
            const auto rows = risfarm::run_sweep(spec, threads);
            risfarm::write_report_csv(spec.output_dir + "/fig_" + spec.name + ".csv", rows);
            std::cout << risfarm::render_table(rows);
            std::cout << "wrote " << spec.output_dir << "/results_" << spec.name << ".csv\n";
            return 0;
        }
        if (train->parsed()) {
            const auto spec = load_spec(spec_path, preset, seed, have_seed, out_dir);
            risfarm::train_agents(spec);
            std::cout << "checkpoints written to " << spec.resolved_checkpoint_dir() << "\n";
            return 0;
        }
        if (report->parsed()) {
            const auto rows = risfarm::read_results_csv(results_path);
            const std::string dir = out_dir.empty()
                                        ? std::filesystem::path(results_path).parent_path().string()
                                        : out_dir;
            const std::string base =
                std::filesystem::path(results_path).stem().string();  // results_<name>
            const std::string out = (dir.empty() ? std::string(".") : dir) + "/fig_" +
                                    (base.rfind("results_", 0) == 0 ? base.substr(8) : base) +
                                    ".csv";
            risfarm::write_report_csv(out, rows);
            std::cout << risfarm::render_table(rows);
            std::cout << "wrote " << out << "\n";
            return 0;
        }
        if (validate->parsed()) {
            if (!spec_path.empty()) {
                risfarm::parse_experiment_spec(read_file(spec_path));
                std::cout << "spec ok\n";
            } else if (!config_path.empty()) {
                risfarm::parse_system_config(read_file(config_path));
                std::cout << "config ok\n";
            } else {
                throw std::runtime_error("validate-config needs --spec or --config");
            }
            return 0;
        }
    } catch (const std::exception& e) {
        return fail_json(e);
    }
    return 0;
}
