#include "fedcni/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "fedcni/errors.hpp"
#include "fedcni/rng.hpp"

namespace fedcni {

Method method_from_string(const std::string& s) {
    if (s == "fedcni") return Method::fedcni;
    if (s == "fedavg") return Method::fedavg;
    if (s == "fedavg_clean") return Method::fedavg_clean;
    throw ConfigError("unknown method '" + s + "' (expected fedcni|fedavg|fedavg_clean)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::fedcni: return "fedcni";
        case Method::fedavg: return "fedavg";
        case Method::fedavg_clean: return "fedavg_clean";
    }
    return "fedcni";
}

void FederationConfig::validate() const {
    if (data.num_classes < 2) throw ConfigError("data.num_classes must be >= 2");
    if (data.feature_dim < data.num_classes) {
        throw ConfigError("data.feature_dim must be >= data.num_classes");
    }
    if (data.num_clients < 1) throw ConfigError("data.num_clients must be >= 1");
    if (static_cast<int>(data.samples_per_class.size()) != data.num_classes) {
        throw ConfigError("data.samples_per_class must have num_classes entries");
    }
    for (int n : data.samples_per_class) {
        if (n < 2) throw ConfigError("data.samples_per_class entries must be >= 2");
    }
    if (!(data.cluster_spread > 0.0)) throw ConfigError("data.cluster_spread must be > 0");
    if (!(data.dirichlet_alpha > 0.0)) throw ConfigError("data.dirichlet_alpha must be > 0");
    if (!(data.noise.sigma > 0.0)) throw ConfigError("data.noise.sigma must be > 0");
    if (data.noise.mu <= -1.0 || data.noise.mu >= 2.0) {
        throw ConfigError("data.noise.mu must lie inside (-1, 2)");
    }
    if (model.hidden_width < 1) throw ConfigError("model.hidden_width must be >= 1");
    if (training.rounds < 0) throw ConfigError("training.rounds must be >= 0");
    if (training.epochs_per_round < 0) throw ConfigError("training.epochs_per_round must be >= 0");
    if (training.batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
    if (!(training.learning_rate > 0.0)) throw ConfigError("training.learning_rate must be > 0");
    if (training.momentum < 0.0 || training.momentum >= 1.0) {
        throw ConfigError("training.momentum must lie in [0, 1)");
    }
    if (training.warmup_rounds < 0) throw ConfigError("training.warmup_rounds must be >= 0");
    if (!(fedcni.tau > 0.0 && fedcni.tau <= 1.0)) throw ConfigError("fedcni.tau must lie in (0,1]");
    if (fedcni.lambda_sim < 0.0) throw ConfigError("fedcni.lambda_sim must be >= 0");
    if (!(fedcni.mixup_alpha > 0.0)) throw ConfigError("fedcni.mixup_alpha must be > 0");
    if (!(fedcni.softmax_temperature > 0.0)) {
        throw ConfigError("fedcni.softmax_temperature must be > 0");
    }
    if (fedcni.switch_round < 0) throw ConfigError("fedcni.switch_round must be >= 0");
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError("unknown config key '" + scope + it.key() + "'");
        }
    }
}

template <typename T>
void maybe_get(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json FederationConfig::to_json() const {
    nlohmann::json j;
    j["data"] = {{"num_classes", data.num_classes},
                 {"feature_dim", data.feature_dim},
                 {"num_clients", data.num_clients},
                 {"samples_per_class", data.samples_per_class},
                 {"cluster_spread", data.cluster_spread},
                 {"dirichlet_alpha", data.dirichlet_alpha},
                 {"noise",
                  {{"type", fedcni::to_string(data.noise.type)},
                   {"mu", data.noise.mu},
                   {"sigma", data.noise.sigma}}}};
    j["model"] = {{"hidden_width", model.hidden_width}};
    j["training"] = {{"rounds", training.rounds},
                     {"epochs_per_round", training.epochs_per_round},
                     {"batch_size", training.batch_size},
                     {"learning_rate", training.learning_rate},
                     {"momentum", training.momentum},
                     {"warmup_rounds", training.warmup_rounds}};
    j["fedcni"] = {{"tau", fedcni.tau},
                   {"lambda_sim", fedcni.lambda_sim},
                   {"mixup_alpha", fedcni.mixup_alpha},
                   {"softmax_temperature", fedcni.softmax_temperature},
                   {"switch_round", fedcni.switch_round},
                   {"enable_curriculum", fedcni.enable_curriculum},
                   {"enable_denoise_mixup", fedcni.enable_denoise_mixup},
                   {"enable_sim_loss", fedcni.enable_sim_loss},
                   {"enable_switching_agg", fedcni.enable_switching_agg}};
    j["method"] = fedcni::to_string(method);
    j["seed"] = seed;
    return j;
}

FederationConfig FederationConfig::from_json(const nlohmann::json& j) {
    FederationConfig cfg;
    reject_unknown_keys(j, {"data", "model", "training", "fedcni", "method", "seed"}, "");

    if (j.contains("data")) {
        const auto& jd = j.at("data");
        reject_unknown_keys(jd,
                            {"num_classes", "feature_dim", "num_clients", "samples_per_class",
                             "cluster_spread", "dirichlet_alpha", "noise"},
                            "data.");
        maybe_get(jd, "num_classes", cfg.data.num_classes);
        maybe_get(jd, "feature_dim", cfg.data.feature_dim);
        maybe_get(jd, "num_clients", cfg.data.num_clients);
        if (jd.contains("samples_per_class")) {
            const auto& spc = jd.at("samples_per_class");
            if (spc.is_number_integer()) {
                cfg.data.samples_per_class.assign(cfg.data.num_classes, spc.get<int>());
            } else {
                cfg.data.samples_per_class = spc.get<std::vector<int>>();
            }
        } else {
            cfg.data.samples_per_class.assign(cfg.data.num_classes, 500);
        }
        maybe_get(jd, "cluster_spread", cfg.data.cluster_spread);
        maybe_get(jd, "dirichlet_alpha", cfg.data.dirichlet_alpha);
        if (jd.contains("noise")) {
            const auto& jn = jd.at("noise");
            reject_unknown_keys(jn, {"type", "mu", "sigma"}, "data.noise.");
            if (jn.contains("type")) {
                cfg.data.noise.type = noise_type_from_string(jn.at("type").get<std::string>());
            }
            maybe_get(jn, "mu", cfg.data.noise.mu);
            maybe_get(jn, "sigma", cfg.data.noise.sigma);
        }
    }
    if (j.contains("model")) {
        const auto& jm = j.at("model");
        reject_unknown_keys(jm, {"hidden_width"}, "model.");
        maybe_get(jm, "hidden_width", cfg.model.hidden_width);
    }
    if (j.contains("training")) {
        const auto& jt = j.at("training");
        reject_unknown_keys(jt,
                            {"rounds", "epochs_per_round", "batch_size", "learning_rate",
                             "momentum", "warmup_rounds"},
                            "training.");
        maybe_get(jt, "rounds", cfg.training.rounds);
        maybe_get(jt, "epochs_per_round", cfg.training.epochs_per_round);
        maybe_get(jt, "batch_size", cfg.training.batch_size);
        maybe_get(jt, "learning_rate", cfg.training.learning_rate);
        maybe_get(jt, "momentum", cfg.training.momentum);
        maybe_get(jt, "warmup_rounds", cfg.training.warmup_rounds);
    }
    if (j.contains("fedcni")) {
        const auto& jf = j.at("fedcni");
        reject_unknown_keys(jf,
                            {"tau", "lambda_sim", "mixup_alpha", "softmax_temperature",
                             "switch_round", "enable_curriculum", "enable_denoise_mixup",
                             "enable_sim_loss", "enable_switching_agg"},
                            "fedcni.");
        maybe_get(jf, "tau", cfg.fedcni.tau);
        maybe_get(jf, "lambda_sim", cfg.fedcni.lambda_sim);
        maybe_get(jf, "mixup_alpha", cfg.fedcni.mixup_alpha);
        maybe_get(jf, "softmax_temperature", cfg.fedcni.softmax_temperature);
        maybe_get(jf, "switch_round", cfg.fedcni.switch_round);
        maybe_get(jf, "enable_curriculum", cfg.fedcni.enable_curriculum);
        maybe_get(jf, "enable_denoise_mixup", cfg.fedcni.enable_denoise_mixup);
        maybe_get(jf, "enable_sim_loss", cfg.fedcni.enable_sim_loss);
        maybe_get(jf, "enable_switching_agg", cfg.fedcni.enable_switching_agg);
    }
    if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
    maybe_get(j, "seed", cfg.seed);

    cfg.validate();
    return cfg;
}

double evaluate(const ModelParams& params, const std::vector<Sample>& test) {
    if (test.empty()) throw ConfigError("evaluate: empty test set");
    int correct = 0;
    for (const Sample& s : test) {
        const Vec probs = predict(params, s.features);
        int best = 0;
        for (int c = 1; c < static_cast<int>(probs.size()); ++c) {
            if (probs[c] > probs[best]) best = c;
        }
        if (best == s.true_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

FederationData build_federation_data(const FederationConfig& cfg) {
    auto [train, test] = generate_blobs(cfg.data.num_classes, cfg.data.feature_dim,
                                        cfg.data.samples_per_class, cfg.data.cluster_spread,
                                        derive_seed(cfg.seed, stream::kBlobs));
    const auto parts = dirichlet_partition(train, cfg.data.num_clients,
                                           cfg.data.dirichlet_alpha,
                                           derive_seed(cfg.seed, stream::kPartition));
    const auto levels = sample_noise_levels(cfg.data.num_clients, cfg.data.noise.mu,
                                            cfg.data.noise.sigma,
                                            derive_seed(cfg.seed, stream::kNoiseLevels));

    FederationData data;
    data.num_classes = cfg.data.num_classes;
    data.feature_dim = cfg.data.feature_dim;
    data.test_set = std::move(test);
    for (int k = 0; k < cfg.data.num_clients; ++k) {
        ClientDataset client;
        client.client_id = k;
        for (int idx : parts[k]) client.samples.push_back(train[idx]);
        data.clients.push_back(corrupt_labels(
            std::move(client), levels[k], cfg.data.noise.type, cfg.data.num_classes,
            derive_seed(cfg.seed, stream::kCorrupt, static_cast<std::uint64_t>(k))));
    }
    return data;
}

FederationResult run_federation(const FederationConfig& config,
                                const std::function<void(const RoundMetrics&)>& on_round,
                                const ClientReportHook& on_client) {
    config.validate();
    return run_federation(config, build_federation_data(config), on_round, on_client);
}

FederationResult run_federation(const FederationConfig& config, FederationData data,
                                const std::function<void(const RoundMetrics&)>& on_round,
                                const ClientReportHook& on_client) {
    config.validate();
    if (data.num_classes != config.data.num_classes ||
        data.feature_dim != config.data.feature_dim) {
        throw ConfigError("federation data does not match the config's class/feature counts");
    }
    if (data.test_set.empty()) throw ConfigError("federation data has an empty test set");
    if (data.clients.empty()) throw ConfigError("federation data has no clients");

    FederationResult result;
    result.data = std::move(data);
    const int K = static_cast<int>(result.data.clients.size());
    const int C = config.data.num_classes;

    const ModelDims dims{config.data.feature_dim, config.model.hidden_width, C};
    ModelParams global = ModelParams::init(dims, derive_seed(config.seed, stream::kModelInit));

    LossSpec spec;
    spec.lambda_sim = config.fedcni.lambda_sim;
    spec.mixup_alpha = config.fedcni.mixup_alpha;
    spec.enable_curriculum = config.fedcni.enable_curriculum;
    spec.enable_denoise_mixup = config.fedcni.enable_denoise_mixup;
    spec.enable_sim_loss = config.fedcni.enable_sim_loss;

    TrainHyper hyper;
    hyper.epochs = config.training.epochs_per_round;
    hyper.batch_size = config.training.batch_size;
    hyper.learning_rate = config.training.learning_rate;
    hyper.momentum = config.training.momentum;

    const LocalMode mode = config.method == Method::fedcni    ? LocalMode::fedcni
                           : config.method == Method::fedavg ? LocalMode::plain_ce_given
                                                             : LocalMode::plain_ce_true;

    AggregationPolicy policy;
    policy.switch_round = config.fedcni.switch_round;
    policy.mode = (config.method == Method::fedcni && config.fedcni.enable_switching_agg)
                      ? AggregationMode::fedcni_switching
                      : AggregationMode::fedavg;

    // per-client session state, persisted across rounds
    std::vector<CurriculumState> states;
    std::vector<std::vector<int>> proto_labels(K);
    for (int k = 0; k < K; ++k) {
        states.push_back(CurriculumState::make(config.fedcni.tau, C,
                                               config.fedcni.softmax_temperature));
    }

    for (int t = 0; t < config.training.rounds; ++t) {
        const bool warmup = t < config.training.warmup_rounds;
        std::vector<LocalTrainReport> reports;
        reports.reserve(K);
        for (int k = 0; k < K; ++k) {
            reports.push_back(local_train(
                global, result.data.clients[k], states[k], proto_labels[k], spec, hyper, C,
                mode, warmup,
                derive_seed(config.seed, stream::kClientRound, static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(t))));
            if (on_client) on_client(t, result.data.clients[k], reports.back());
        }

        std::vector<ClientUpdate> updates;
        updates.reserve(K);
        for (int k = 0; k < K; ++k) {
            updates.push_back({&reports[k].updated_params, k, result.data.clients[k].size(),
                               reports[k].clean_count});
        }
        AggregateResult agg = aggregate(updates, t, policy);
        global = std::move(agg.params);

        RoundMetrics m;
        m.round = t;
        m.test_accuracy = evaluate(global, result.data.test_set);
        m.aggregation_weights = std::move(agg.weights);
        m.clean_fallback = agg.clean_fallback;
        double prec = 0.0, rec = 0.0, pacc = 0.0;
        for (int k = 0; k < K; ++k) {
            const auto [p, r] = detection_metrics(reports[k].detection, result.data.clients[k]);
            prec += p;
            rec += r;
            pacc += pseudo_label_accuracy(reports[k].pseudo, result.data.clients[k]);
            m.per_client.push_back({reports[k].clean_count,
                                    reports[k].detection.noisy_count(),
                                    static_cast<int>(reports[k].pseudo.changed.size())});
        }
        m.mean_detection_precision = prec / K;
        m.mean_detection_recall = rec / K;
        m.mean_pseudo_accuracy = pacc / K;
        if (on_round) on_round(m);
        result.rounds.push_back(std::move(m));
    }

    result.final_params = std::move(global);
    return result;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& field) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += '|';
        out += field(items[i]);
    }
    return out;
}

}  // namespace

std::string metrics_csv_header() {
    return "round,test_accuracy,mean_detection_precision,mean_detection_recall,"
           "mean_pseudo_accuracy,clean_counts,noisy_counts,num_relabeled,"
           "aggregation_weights,clean_fallback";
}

std::string metrics_to_csv_row(const RoundMetrics& m) {
    std::string row = std::to_string(m.round);
    row += ',' + fmt_double(m.test_accuracy);
    row += ',' + fmt_double(m.mean_detection_precision);
    row += ',' + fmt_double(m.mean_detection_recall);
    row += ',' + fmt_double(m.mean_pseudo_accuracy);
    row += ',' + join(m.per_client, [](const ClientRoundStats& c) {
        return std::to_string(c.clean_count);
    });
    row += ',' + join(m.per_client, [](const ClientRoundStats& c) {
        return std::to_string(c.noisy_count);
    });
    row += ',' + join(m.per_client, [](const ClientRoundStats& c) {
        return std::to_string(c.num_relabeled);
    });
    row += ',' + join(m.aggregation_weights, [](double w) { return fmt_double(w); });
    row += ',';
    row += m.clean_fallback ? '1' : '0';
    return row;
}

std::string metrics_to_csv(const std::vector<RoundMetrics>& rounds) {
    std::string out = metrics_csv_header() + '\n';
    for (const RoundMetrics& m : rounds) out += metrics_to_csv_row(m) + '\n';
    return out;
}

}  // namespace fedcni
