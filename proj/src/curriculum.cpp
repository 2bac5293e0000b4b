#include "fedcni/curriculum.hpp"

#include <algorithm>
#include <cmath>

#include "fedcni/errors.hpp"

namespace fedcni {

CurriculumState CurriculumState::make(double tau, int num_classes, double temperature) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0,1]");
    if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be > 0");
    CurriculumState st;
    st.tau_base = tau;
    st.tau_per_class.assign(num_classes, tau);
    st.rho_per_class.assign(num_classes, 0.0);
    st.softmax_temperature = temperature;
    return st;
}

namespace {

int argmax_lowest_tie(const Vec& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace

void compute_difficulty(const ModelParams& params, const ClientDataset& dataset,
                        const std::vector<int>& labels, const DetectionResult& detection,
                        CurriculumState& state) {
    const int num_classes = static_cast<int>(state.tau_per_class.size());
    std::vector<int> class_size(num_classes, 0);
    std::vector<int> confident_clean(num_classes, 0);

    for (std::size_t i = 0; i < dataset.samples.size(); ++i) class_size[labels[i]] += 1;

    for (int i : detection.clean_indices) {
        const int c = labels[i];
        const Vec probs = predict(params, dataset.samples[i].features);
        const int pred = argmax_lowest_tie(probs);
        if (probs[pred] > state.tau_per_class[c] && pred == c) confident_clean[c] += 1;
    }
    for (int c = 0; c < num_classes; ++c) {
        state.rho_per_class[c] =
            class_size[c] == 0
                ? 0.0
                : static_cast<double>(confident_clean[c]) / static_cast<double>(class_size[c]);
    }
}

void update_thresholds(CurriculumState& state) {
    const double max_rho =
        *std::max_element(state.rho_per_class.begin(), state.rho_per_class.end());
    if (max_rho <= 0.0) {
        std::fill(state.tau_per_class.begin(), state.tau_per_class.end(), state.tau_base);
        return;
    }
    for (std::size_t c = 0; c < state.tau_per_class.size(); ++c) {
        state.tau_per_class[c] = state.rho_per_class[c] / max_rho * state.tau_base;
    }
}

PseudoLabelOutcome pseudo_label(const ModelParams& params, const PrototypeSet& prototypes,
                                const ClientDataset& dataset, const std::vector<int>& labels,
                                const DetectionResult& detection,
                                const CurriculumState& state) {
    PseudoLabelOutcome outcome;
    outcome.working_labels = labels;
    outcome.confidences.reserve(detection.noisy_indices.size());

    std::vector<int> valid_classes;
    for (int c = 0; c < prototypes.num_classes(); ++c) {
        if (prototypes.valid[c]) valid_classes.push_back(c);
    }
    if (valid_classes.empty()) {
        outcome.confidences.assign(detection.noisy_indices.size(), 0.0);
        return outcome;
    }

    const double temp = state.softmax_temperature;
    for (int i : detection.noisy_indices) {
        const Vec f = embed(params, dataset.samples[i].features);
        Vec sims(valid_classes.size());
        for (std::size_t m = 0; m < valid_classes.size(); ++m) {
            sims[m] = cosine_similarity(prototypes.prototypes[valid_classes[m]], f);
        }
        const int best = argmax_lowest_tie(sims);
        const int pseudo = valid_classes[best];

        // softmax over similarities; the argmax entry is the confidence
        double denom = 0.0;
        const double max_sim = sims[best];
        for (double s : sims) denom += std::exp((s - max_sim) / temp);
        const double confidence = 1.0 / denom;

        outcome.confidences.push_back(confidence);
        if (confidence > state.tau_per_class[pseudo]) {
            outcome.working_labels[i] = pseudo;
            outcome.changed.push_back(i);
        }
    }
    return outcome;
}

double pseudo_label_accuracy(const PseudoLabelOutcome& outcome,
                             const ClientDataset& dataset) {
    if (outcome.changed.empty()) return 1.0;
    int correct = 0;
    for (int i : outcome.changed) {
        if (outcome.working_labels[i] == dataset.samples[i].true_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(outcome.changed.size());
}

}  // namespace fedcni
