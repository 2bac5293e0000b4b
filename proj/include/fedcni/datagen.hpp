#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedcni/types.hpp"

namespace fedcni {

enum class NoiseType { symmetric, pair };

NoiseType noise_type_from_string(const std::string& s);
std::string to_string(NoiseType t);

// Isotropic Gaussian blobs with class centers at unit one-hot corners
// (requires feature_dim >= num_classes). 20% of each class is held out as
// test data. Labels start clean: given == true for every sample.
std::pair<std::vector<Sample>, std::vector<Sample>> generate_blobs(
    int num_classes, int feature_dim, const std::vector<int>& samples_per_class,
    double cluster_spread, std::uint64_t seed);

// Per-class Dirichlet(alpha) allocation across clients with largest-remainder
// rounding. Re-draws with a new sub-seed (up to 100 times) until every client
// holds at least one sample. Returns per-client index lists into `train`.
std::vector<std::vector<int>> dirichlet_partition(const std::vector<Sample>& train,
                                                  int num_clients, double alpha,
                                                  std::uint64_t seed);

// Per-client noise levels from Normal(mu, sigma^2) rejection-sampled into [0,1].
std::vector<double> sample_noise_levels(int num_clients, double mu, double sigma,
                                        std::uint64_t seed);

// Flips the given labels of exactly round(noise_level * n) uniformly chosen
// samples. Symmetric: resample uniformly among the other classes. Pair:
// given <- (true + 1) mod C. Features and true labels are never touched;
// the stored noise_level becomes the realized fraction.
ClientDataset corrupt_labels(ClientDataset client, double noise_level,
                             NoiseType noise_type, int num_classes,
                             std::uint64_t seed);

// JSON snapshot of a corrupted federation for inspection and replay.
nlohmann::json federation_to_json(const FederationData& data);
FederationData federation_from_json(const nlohmann::json& j);

}  // namespace fedcni
