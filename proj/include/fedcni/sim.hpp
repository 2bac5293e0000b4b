#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcni/aggregator.hpp"
#include "fedcni/datagen.hpp"
#include "fedcni/model.hpp"
#include "fedcni/solver.hpp"
#include "fedcni/types.hpp"

namespace fedcni {

enum class Method { fedcni, fedavg, fedavg_clean };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct NoiseConfig {
    NoiseType type = NoiseType::symmetric;
    double mu = 0.4;
    double sigma = 0.2;
};

struct DataConfig {
    int num_classes = 10;
    int feature_dim = 20;
    int num_clients = 20;
    std::vector<int> samples_per_class = std::vector<int>(10, 500);
    double cluster_spread = 0.31;
    double dirichlet_alpha = 0.7;
    NoiseConfig noise;
};

struct ModelConfig {
    int hidden_width = 64;
};

struct TrainingConfig {
    int rounds = 100;
    int epochs_per_round = 5;
    int batch_size = 100;
    double learning_rate = 0.01;
    double momentum = 0.5;
    int warmup_rounds = 5;
};

struct FedcniConfig {
    double tau = 0.5;
    double lambda_sim = 0.7;
    double mixup_alpha = 0.3;
    // Sharpens the softmax over cosine similarities. Cosines live in [-1,1],
    // so at temperature 1 the top softmax entry is capped at
    // e^2/(e^2 + C - 1) < tau for C = 10; 0.05 restores a usable confidence
    // range for the threshold gate.
    double softmax_temperature = 0.05;
    int switch_round = 15;  // T_s
    bool enable_curriculum = true;
    bool enable_denoise_mixup = true;
    bool enable_sim_loss = true;
    bool enable_switching_agg = true;
};

struct FederationConfig {
    DataConfig data;
    ModelConfig model;
    TrainingConfig training;
    FedcniConfig fedcni;
    Method method = Method::fedcni;
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::json to_json() const;
    // Strict: unknown keys anywhere are a ConfigError.
    static FederationConfig from_json(const nlohmann::json& j);
};

struct ClientRoundStats {
    int clean_count = 0;
    int noisy_count = 0;
    int num_relabeled = 0;
};

struct RoundMetrics {
    int round = 0;
    double test_accuracy = 0.0;
    double mean_detection_precision = 0.0;
    double mean_detection_recall = 0.0;
    double mean_pseudo_accuracy = 0.0;
    std::vector<ClientRoundStats> per_client;
    Vec aggregation_weights;
    bool clean_fallback = false;
};

struct FederationResult {
    std::vector<RoundMetrics> rounds;
    ModelParams final_params;
    FederationData data;
};

// Generates, partitions and corrupts the synthetic federation described by
// the config; exposed separately so snapshots can be replayed.
FederationData build_federation_data(const FederationConfig& config);

// Per-client observer, called once per (round, client) with that client's
// full training report (curriculum state, pseudo outcome, epoch losses).
using ClientReportHook =
    std::function<void(int round, const ClientDataset& client, const LocalTrainReport&)>;

// Full pipeline: generate + partition + corrupt once, then rounds of
// broadcast -> local training -> aggregation -> evaluation. Deterministic
// in the config (including its seed). on_round, when set, is invoked after
// every completed round so callers can flush metrics before a later abort.
FederationResult run_federation(const FederationConfig& config,
                                const std::function<void(const RoundMetrics&)>& on_round = {},
                                const ClientReportHook& on_client = {});

// Same round loop over pre-built data (snapshot replay); the config's data
// section is ignored except for num_classes/feature_dim consistency checks.
FederationResult run_federation(const FederationConfig& config, FederationData data,
                                const std::function<void(const RoundMetrics&)>& on_round = {},
                                const ClientReportHook& on_client = {});

// Top-1 accuracy against true labels; argmax ties break to the lowest class.
double evaluate(const ModelParams& params, const std::vector<Sample>& test);

std::string metrics_csv_header();
std::string metrics_to_csv_row(const RoundMetrics& m);
std::string metrics_to_csv(const std::vector<RoundMetrics>& rounds);

}  // namespace fedcni
