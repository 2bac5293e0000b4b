#pragma once

#include <vector>

namespace fedcni {

using Vec = std::vector<double>;

// One labeled training point. given_label is what the annotator said,
// true_label is the hidden ground truth; they differ on noisy samples.
struct Sample {
    Vec features;
    int given_label = 0;
    int true_label = 0;
    long id = -1;
};

struct ClientDataset {
    int client_id = 0;
    std::vector<Sample> samples;
    // Realized fraction of samples with given_label != true_label.
    double noise_level = 0.0;

    int size() const { return static_cast<int>(samples.size()); }
};

struct FederationData {
    std::vector<ClientDataset> clients;
    std::vector<Sample> test_set;  // uncorrupted, held out
    int num_classes = 0;
    int feature_dim = 0;
};

}  // namespace fedcni
