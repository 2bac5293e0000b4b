#pragma once

#include <map>
#include <utility>
#include <vector>

#include "fedcni/model.hpp"
#include "fedcni/types.hpp"

namespace fedcni {

// Per-class mean embeddings under the current working labels. A class with
// no labeled samples is marked invalid and must never be consulted.
struct PrototypeSet {
    std::vector<Vec> prototypes;
    std::vector<int> counts;
    std::vector<bool> valid;

    int num_classes() const { return static_cast<int>(prototypes.size()); }
};

struct PerClassSplit {
    std::vector<int> clean;
    std::vector<int> noisy;
};

// Disjoint, exhaustive split of a client's sample indices.
struct DetectionResult {
    std::vector<int> clean_indices;
    std::vector<int> noisy_indices;
    // Per-sample score the split was computed from: cosine similarity to the
    // own-label prototype for the prototypical detector, cross-entropy loss
    // for the small-loss baseline.
    Vec scores;
    std::map<int, PerClassSplit> per_class_splits;
    std::vector<char> is_noisy;  // size n, fast membership lookup

    int clean_count() const { return static_cast<int>(clean_indices.size()); }
    int noisy_count() const { return static_cast<int>(noisy_indices.size()); }
};

PrototypeSet build_prototypes(const ModelParams& params, const ClientDataset& dataset,
                              const std::vector<int>& labels, int num_classes);

// <p,f> / (|p|*|f|); 0 when either norm is below 1e-12.
double cosine_similarity(const Vec& p, const Vec& f);

// Prototypical detection: per class, a 2-component GMM over the cosine
// similarities to that class's prototype; the lower-similarity component is
// declared noisy. Classes smaller than min_class_size are declared clean.
// The overload taking a PrototypeSet keeps class membership on `labels`
// while scoring against prototypes that may have been built from corrected
// labels.
DetectionResult detect_noise(const ModelParams& params, const ClientDataset& dataset,
                             const std::vector<int>& labels, int num_classes,
                             int min_class_size = 2);
DetectionResult detect_noise(const ModelParams& params, const ClientDataset& dataset,
                             const std::vector<int>& labels, const PrototypeSet& prototypes,
                             int num_classes, int min_class_size = 2);

// Small-loss baseline: one GMM over all per-sample cross-entropy losses
// against the working labels; the low-loss component is declared clean.
// Diagnostic only, never drives training.
DetectionResult small_loss_detect(const ModelParams& params, const ClientDataset& dataset,
                                  const std::vector<int>& labels, int num_classes);

// Everything clean; used by the plain-FedAvg training paths.
DetectionResult all_clean_detection(int n);

// Precision/recall of the noisy split against ground truth, where a positive
// is a sample whose ORIGINAL given label differs from its true label.
// Precision is 1 for an empty noisy set, recall is 1 when nothing is noisy.
std::pair<double, double> detection_metrics(const DetectionResult& result,
                                            const ClientDataset& dataset);

}  // namespace fedcni
