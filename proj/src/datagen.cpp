#include "fedcni/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fedcni/errors.hpp"
#include "fedcni/rng.hpp"

namespace fedcni {

NoiseType noise_type_from_string(const std::string& s) {
    if (s == "symmetric") return NoiseType::symmetric;
    if (s == "pair") return NoiseType::pair;
    throw ConfigError("unknown noise type '" + s + "' (expected symmetric|pair)");
}

std::string to_string(NoiseType t) {
    return t == NoiseType::symmetric ? "symmetric" : "pair";
}

std::pair<std::vector<Sample>, std::vector<Sample>> generate_blobs(
    int num_classes, int feature_dim, const std::vector<int>& samples_per_class,
    double cluster_spread, std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (feature_dim < num_classes) {
        throw ConfigError("feature_dim must be >= num_classes for one-hot centers");
    }
    if (static_cast<int>(samples_per_class.size()) != num_classes) {
        throw ConfigError("samples_per_class must have one entry per class");
    }
    for (int n : samples_per_class) {
        if (n < 2) throw ConfigError("each samples_per_class entry must be >= 2");
    }
    if (!(cluster_spread > 0.0)) throw ConfigError("cluster_spread must be > 0");

    auto rng = make_rng(seed);
    std::normal_distribution<double> noise(0.0, cluster_spread);

    // Class centers at scaled one-hot corners; separation is governed by
    // cluster_spread relative to kCenterScale.
    constexpr double kCenterScale = 1.4;

    std::vector<Sample> train, test;
    long next_id = 0;
    for (int c = 0; c < num_classes; ++c) {
        const int n = samples_per_class[c];
        const int n_test = static_cast<int>(std::llround(0.2 * n));
        for (int i = 0; i < n; ++i) {
            Sample s;
            s.features.assign(feature_dim, 0.0);
            for (int d = 0; d < feature_dim; ++d) s.features[d] = noise(rng);
            s.features[c] += kCenterScale;
            s.given_label = c;
            s.true_label = c;
            s.id = next_id++;
            if (i >= n - n_test) {
                test.push_back(std::move(s));
            } else {
                train.push_back(std::move(s));
            }
        }
    }
    return {std::move(train), std::move(test)};
}

namespace {

// Quotas q_k summing to total; floors plus one extra for the largest
// fractional remainders (ties broken toward lower index).
std::vector<int> largest_remainder(const std::vector<double>& quotas, int total) {
    const int k = static_cast<int>(quotas.size());
    std::vector<int> counts(k);
    std::vector<std::pair<double, int>> rema(k);
    int assigned = 0;
    for (int i = 0; i < k; ++i) {
        counts[i] = static_cast<int>(std::floor(quotas[i]));
        assigned += counts[i];
        rema[i] = {quotas[i] - std::floor(quotas[i]), i};
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int r = 0; r < total - assigned; ++r) counts[rema[r].second] += 1;
    return counts;
}

}  // namespace

std::vector<std::vector<int>> dirichlet_partition(const std::vector<Sample>& train,
                                                  int num_clients, double alpha,
                                                  std::uint64_t seed) {
    if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("dirichlet alpha must be > 0");
    if (static_cast<int>(train.size()) < num_clients) {
        throw ConfigError("fewer samples than clients");
    }

    // group indices by label
    int num_classes = 0;
    for (const Sample& s : train) num_classes = std::max(num_classes, s.given_label + 1);
    std::vector<std::vector<int>> by_class(num_classes);
    for (std::size_t i = 0; i < train.size(); ++i) {
        by_class[train[i].given_label].push_back(static_cast<int>(i));
    }

    constexpr int kMaxRetries = 100;
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
        auto rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
        std::gamma_distribution<double> gamma(alpha, 1.0);

        std::vector<std::vector<int>> parts(num_clients);
        for (int c = 0; c < num_classes; ++c) {
            auto indices = by_class[c];
            if (indices.empty()) continue;
            std::shuffle(indices.begin(), indices.end(), rng);

            std::vector<double> props(num_clients);
            double sum = 0.0;
            for (double& p : props) {
                p = gamma(rng);
                sum += p;
            }
            if (sum <= 0.0) {
                std::fill(props.begin(), props.end(), 1.0);
                sum = static_cast<double>(num_clients);
            }
            std::vector<double> quotas(num_clients);
            for (int k = 0; k < num_clients; ++k) {
                quotas[k] = static_cast<double>(indices.size()) * props[k] / sum;
            }
            const auto counts = largest_remainder(quotas, static_cast<int>(indices.size()));
            std::size_t off = 0;
            for (int k = 0; k < num_clients; ++k) {
                parts[k].insert(parts[k].end(), indices.begin() + off,
                                indices.begin() + off + counts[k]);
                off += counts[k];
            }
        }

        bool ok = true;
        for (int k = 0; k < num_clients; ++k) {
            if (parts[k].empty()) {
                ok = false;
                if (attempt == kMaxRetries) {
                    throw PartitionError("client " + std::to_string(k) +
                                         " received no samples after " +
                                         std::to_string(kMaxRetries) + " retries");
                }
                break;
            }
        }
        if (ok) return parts;
    }
    throw PartitionError("unreachable");
}

std::vector<double> sample_noise_levels(int num_clients, double mu, double sigma,
                                        std::uint64_t seed) {
    if (!(sigma > 0.0)) throw ConfigError("noise sigma must be > 0");
    if (mu <= -1.0 || mu >= 2.0) {
        throw ConfigError("noise mu must lie inside (-1, 2); rejection into [0,1] "
                          "would stall at mu=" + std::to_string(mu));
    }
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(mu, sigma);
    std::vector<double> levels(num_clients);
    for (double& lv : levels) {
        double draw;
        do {
            draw = normal(rng);
        } while (draw < 0.0 || draw > 1.0);
        lv = draw;
    }
    return levels;
}

ClientDataset corrupt_labels(ClientDataset client, double noise_level,
                             NoiseType noise_type, int num_classes,
                             std::uint64_t seed) {
    if (noise_level < 0.0 || noise_level > 1.0) {
        throw ConfigError("noise_level must lie in [0,1]");
    }
    const int n = client.size();
    if (n == 0) throw ConfigError("cannot corrupt an empty client dataset");
    const int flips = static_cast<int>(std::llround(noise_level * n));

    auto rng = make_rng(seed);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::uniform_int_distribution<int> other(0, num_classes - 2);
    for (int i = 0; i < flips; ++i) {
        Sample& s = client.samples[order[i]];
        if (noise_type == NoiseType::symmetric) {
            int lbl = other(rng);
            if (lbl >= s.true_label) ++lbl;  // uniform over the C-1 other classes
            s.given_label = lbl;
        } else {
            s.given_label = (s.true_label + 1) % num_classes;
        }
    }
    client.noise_level = static_cast<double>(flips) / static_cast<double>(n);
    return client;
}

nlohmann::json federation_to_json(const FederationData& data) {
    nlohmann::json j;
    j["num_classes"] = data.num_classes;
    j["feature_dim"] = data.feature_dim;
    auto sample_to_json = [](const Sample& s) {
        return nlohmann::json{{"id", s.id},
                              {"features", s.features},
                              {"given_label", s.given_label},
                              {"true_label", s.true_label}};
    };
    j["clients"] = nlohmann::json::array();
    for (const ClientDataset& c : data.clients) {
        nlohmann::json jc;
        jc["client_id"] = c.client_id;
        jc["noise_level"] = c.noise_level;
        jc["samples"] = nlohmann::json::array();
        for (const Sample& s : c.samples) jc["samples"].push_back(sample_to_json(s));
        j["clients"].push_back(std::move(jc));
    }
    j["test_set"] = nlohmann::json::array();
    for (const Sample& s : data.test_set) j["test_set"].push_back(sample_to_json(s));
    return j;
}

FederationData federation_from_json(const nlohmann::json& j) {
    FederationData data;
    data.num_classes = j.at("num_classes").get<int>();
    data.feature_dim = j.at("feature_dim").get<int>();
    auto sample_from_json = [](const nlohmann::json& js) {
        Sample s;
        s.id = js.at("id").get<long>();
        s.features = js.at("features").get<Vec>();
        s.given_label = js.at("given_label").get<int>();
        s.true_label = js.at("true_label").get<int>();
        return s;
    };
    for (const auto& jc : j.at("clients")) {
        ClientDataset c;
        c.client_id = jc.at("client_id").get<int>();
        c.noise_level = jc.at("noise_level").get<double>();
        for (const auto& js : jc.at("samples")) c.samples.push_back(sample_from_json(js));
        data.clients.push_back(std::move(c));
    }
    if (j.contains("test_set")) {
        for (const auto& js : j.at("test_set")) data.test_set.push_back(sample_from_json(js));
    }
    return data;
}

}  // namespace fedcni
