#pragma once

#include <vector>

#include "fedcni/detector.hpp"
#include "fedcni/model.hpp"
#include "fedcni/types.hpp"

namespace fedcni {

// Client-private pseudo-labeling state carried across rounds.
struct CurriculumState {
    double tau_base = 0.5;
    Vec tau_per_class;  // tau_base * rho_c / max(rho), capped at tau_base
    Vec rho_per_class;  // per-class learning difficulty in [0,1]
    bool warmup_done = false;
    double softmax_temperature = 0.05;

    static CurriculumState make(double tau, int num_classes, double temperature = 0.05);
};

// rho_c = #{ clean samples of class c with confidence > tau_c and correct
// argmax } / |D_c|, where D_c is the working-label class membership.
void compute_difficulty(const ModelParams& params, const ClientDataset& dataset,
                        const std::vector<int>& labels, const DetectionResult& detection,
                        CurriculumState& state);

// tau_c = tau_base * rho_c / max(rho); all tau_base when max(rho) = 0.
void update_thresholds(CurriculumState& state);

struct PseudoLabelOutcome {
    std::vector<int> working_labels;
    // Indices (all within the detected noisy set) that were assigned a
    // pseudo label this round.
    std::vector<int> changed;
    // Softmax confidence q~ for every detected-noisy sample, by noisy index.
    Vec confidences;
};

// Prototypical pseudo labeling over the detected noisy set: argmax cosine
// similarity to the valid prototypes, gated by q~ > tau[argmax]. Clean
// samples keep their labels; below-threshold samples keep theirs too.
PseudoLabelOutcome pseudo_label(const ModelParams& params, const PrototypeSet& prototypes,
                                const ClientDataset& dataset, const std::vector<int>& labels,
                                const DetectionResult& detection,
                                const CurriculumState& state);

// Fraction of assigned pseudo labels that match the true label; 1 when no
// label was assigned.
double pseudo_label_accuracy(const PseudoLabelOutcome& outcome,
                             const ClientDataset& dataset);

}  // namespace fedcni
