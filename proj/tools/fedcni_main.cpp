#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedcni/errors.hpp"
#include "fedcni/rng.hpp"
#include "fedcni/sim.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

fedcni::FederationConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fedcni::ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw fedcni::ConfigError("config parse error in '" + path + "': " + e.what());
    }
    return fedcni::FederationConfig::from_json(j);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> method, const std::string& out_dir,
            const std::string& dump_data, const std::string& trace_path, bool save_model) {
    fedcni::FederationConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (method) cfg.method = fedcni::method_from_string(*method);
    cfg.validate();

    write_file(out_dir + "/config.resolved.json", cfg.to_json().dump(2) + "\n");

    std::ofstream metrics(out_dir + "/metrics.csv", std::ios::binary);
    if (!metrics) throw std::runtime_error("cannot write metrics.csv in '" + out_dir + "'");
    metrics << fedcni::metrics_csv_header() << '\n';

    std::ofstream trace;
    fedcni::ClientReportHook on_client;
    if (!trace_path.empty()) {
        trace.open(trace_path, std::ios::binary);
        if (!trace) throw std::runtime_error("cannot write '" + trace_path + "'");
        on_client = [&](int round, const fedcni::ClientDataset& client,
                        const fedcni::LocalTrainReport& report) {
            nlohmann::json line;
            line["round"] = round;
            line["client"] = client.client_id;
            line["rho"] = report.curriculum.rho_per_class;
            line["tau"] = report.curriculum.tau_per_class;
            line["num_changed"] = report.pseudo.changed.size();
            line["pseudo_accuracy"] = fedcni::pseudo_label_accuracy(report.pseudo, client);
            line["epoch_losses"] = report.epoch_losses;
            trace << line.dump() << '\n';
        };
    }

    fedcni::FederationResult result;
    try {
        result = fedcni::run_federation(
            cfg,
            [&](const fedcni::RoundMetrics& m) {
                metrics << fedcni::metrics_to_csv_row(m) << '\n';
                metrics.flush();
            },
            on_client);
    } catch (...) {
        metrics.flush();  // keep the partial metrics of the aborted run
        throw;
    }

    if (!dump_data.empty()) {
        write_file(dump_data, fedcni::federation_to_json(result.data).dump() + "\n");
    }
    if (save_model) {
        write_file(out_dir + "/model.final.bin", result.final_params.to_bytes());
    }

    const double final_acc =
        result.rounds.empty() ? 0.0 : result.rounds.back().test_accuracy;
    std::cout << "method=" << fedcni::to_string(cfg.method) << " rounds="
              << result.rounds.size() << " final_test_accuracy=" << final_acc << '\n';
    return 0;
}

// Loads a federation snapshot, warms a model up on each client's given
// labels, then dumps both detectors' per-class splits as JSON lines.
int cmd_inspect_detection(const std::string& snapshot_path, const std::string& out_path,
                          int hidden_width, int warm_epochs, std::uint64_t seed) {
    std::ifstream in(snapshot_path);
    if (!in) throw fedcni::ConfigError("cannot open snapshot '" + snapshot_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw fedcni::ConfigError("snapshot parse error: " + std::string(e.what()));
    }
    const fedcni::FederationData data = fedcni::federation_from_json(j);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary);
        if (!file) throw std::runtime_error("cannot write '" + out_path + "'");
        out = &file;
    }

    const fedcni::ModelDims dims{data.feature_dim, hidden_width, data.num_classes};
    fedcni::TrainHyper hyper;
    hyper.epochs = warm_epochs;

    for (const fedcni::ClientDataset& client : data.clients) {
        std::vector<int> labels(client.samples.size());
        for (std::size_t i = 0; i < client.samples.size(); ++i) {
            labels[i] = client.samples[i].given_label;
        }

        fedcni::ModelParams params =
            fedcni::ModelParams::init(dims, fedcni::derive_seed(seed, fedcni::stream::kModelInit));
        if (warm_epochs > 0) {
            fedcni::CurriculumState st = fedcni::CurriculumState::make(0.5, data.num_classes);
            std::vector<int> proto_labels;
            auto report = fedcni::local_train(
                params, client, st, proto_labels, fedcni::LossSpec{}, hyper, data.num_classes,
                fedcni::LocalMode::plain_ce_given, /*warmup=*/true,
                fedcni::derive_seed(seed, fedcni::stream::kClientRound,
                                    static_cast<std::uint64_t>(client.client_id)));
            params = std::move(report.updated_params);
        }

        const auto emit = [&](const char* name, const fedcni::DetectionResult& det) {
            for (const auto& [cls, split] : det.per_class_splits) {
                nlohmann::json line;
                line["round"] = 0;
                line["client"] = client.client_id;
                line["class"] = cls;
                line["detector"] = name;
                fedcni::Vec sims;
                nlohmann::json noisy_ids = nlohmann::json::array();
                nlohmann::json clean_ids = nlohmann::json::array();
                for (int i : split.clean) {
                    sims.push_back(det.scores[i]);
                    clean_ids.push_back(client.samples[i].id);
                }
                for (int i : split.noisy) {
                    sims.push_back(det.scores[i]);
                    noisy_ids.push_back(client.samples[i].id);
                }
                line["similarities"] = sims;
                line["noisy_ids"] = noisy_ids;
                line["clean_ids"] = clean_ids;
                *out << line.dump() << '\n';
            }
        };
        emit("prototypical", fedcni::detect_noise(params, client, labels, data.num_classes));
        emit("small_loss", fedcni::small_loss_detect(params, client, labels, data.num_classes));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated learning simulator for noisy, class-imbalanced clients"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", dump_data, trace_path, method_str;
    std::optional<std::uint64_t> seed_opt;
    bool save_model = false;

    CLI::App* run = app.add_subcommand("run", "Run a federation from a JSON config");
    run->add_option("--config", config_path, "Path to the federation config (JSON)")
        ->required();
    std::uint64_t seed_val = 0;
    CLI::Option* seed_flag = run->add_option("--seed", seed_val, "Override config seed");
    run->add_option("--method", method_str, "Override method: fedcni|fedavg|fedavg_clean");
    run->add_option("--out", out_dir, "Output directory (metrics.csv, config.resolved.json)");
    run->add_option("--dump-data", dump_data, "Also dump the corrupted federation snapshot");
    run->add_option("--trace", trace_path, "Write per-client curriculum/loss traces (JSON lines)");
    run->add_flag("--save-model", save_model, "Write model.final.bin (flat doubles: "
                                              "W1 row-major, b1, W2 row-major, b2)");

    std::string snapshot_path, inspect_out;
    int hidden_width = 64, warm_epochs = 30;
    std::uint64_t inspect_seed = 1;
    CLI::App* inspect = app.add_subcommand(
        "inspect-detection", "Run both noise detectors over a federation snapshot");
    inspect->add_option("--snapshot", snapshot_path, "Snapshot JSON from run --dump-data")
        ->required();
    inspect->add_option("--out", inspect_out, "Write JSON lines here instead of stdout");
    inspect->add_option("--hidden", hidden_width, "Hidden width for the probe model");
    inspect->add_option("--warm-epochs", warm_epochs,
                        "Local warm-up epochs before detection");
    inspect->add_option("--seed", inspect_seed, "Probe model seed");

    try {
        app.parse(argc, argv);
        if (*seed_flag) seed_opt = seed_val;
        std::optional<std::string> method_opt;
        if (!method_str.empty()) method_opt = method_str;

        if (run->parsed()) {
            return cmd_run(config_path, seed_opt, method_opt, out_dir, dump_data, trace_path,
                           save_model);
        }
        return cmd_inspect_detection(snapshot_path, inspect_out, hidden_width, warm_epochs,
                                     inspect_seed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    } catch (const fedcni::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumericError;
    }
}
