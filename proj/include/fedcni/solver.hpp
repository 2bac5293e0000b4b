#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fedcni/curriculum.hpp"
#include "fedcni/detector.hpp"
#include "fedcni/model.hpp"
#include "fedcni/types.hpp"

namespace fedcni {

// Loss composition for local training; flags independently toggle the
// method's components for ablations.
struct LossSpec {
    double lambda_sim = 0.7;
    double mixup_alpha = 0.3;  // Beta(alpha, alpha) mixing coefficient
    bool enable_denoise_mixup = true;
    bool enable_sim_loss = true;
    bool enable_curriculum = true;
};

struct TrainHyper {
    int epochs = 5;
    int batch_size = 100;
    double learning_rate = 0.01;
    double momentum = 0.5;
};

struct MixedSample {
    Vec features;
    Vec soft_label;
};

// (lambda*x_a + (1-lambda)*x_b, lambda*y_a + (1-lambda)*y_b).
MixedSample mixup_pair(const MixedSample& a, const MixedSample& b, double lambda);

// A mini-batch after denoise Mixup: detected-noisy samples mixed with a
// clean partner of their own working class (self-pair when the class has no
// clean member), clean samples mixed with a random clean partner. The two
// branches keep separate batches because each is mean-normalized on its own.
struct MixedBatch {
    SoftBatch noisy_branch;
    SoftBatch clean_branch;
    // Batch members in the detected noisy set (original, unmixed); these
    // feed the prototypical similarity loss.
    std::vector<int> noisy_members;
};

MixedBatch denoise_mixup_batch(std::span<const int> batch_indices,
                               const DetectionResult& detection,
                               const std::vector<int>& working_labels,
                               const ClientDataset& dataset, int num_classes,
                               double mixup_alpha, std::mt19937_64& rng);

// Mean (1 - cos(prototype[working_label[i]], embed(x_i))) over the given
// noisy indices; 0 for an empty set.
double sim_loss(const ModelParams& params, const PrototypeSet& prototypes,
                const ClientDataset& dataset, std::span<const int> noisy_indices,
                const std::vector<int>& working_labels);

// One gradient evaluation of L_sum = L_mix + lambda_sim * L_sim on a
// prepared batch. Exposed separately so the decomposition and the gradient
// can be checked against independent oracles.
struct SumLossGrad {
    double sum_loss = 0.0;
    double mix_loss = 0.0;
    double sim_loss = 0.0;
    ModelParams grad;
};

SumLossGrad sum_loss_backward(const ModelParams& params, const MixedBatch& batch,
                              const PrototypeSet& prototypes, const ClientDataset& dataset,
                              const std::vector<int>& working_labels, const LossSpec& spec);

enum class LocalMode {
    fedcni,          // full pipeline
    plain_ce_given,  // FedAvg baseline: cross-entropy on given labels
    plain_ce_true,   // clean reference: cross-entropy on true labels
};

struct LocalTrainReport {
    ModelParams updated_params;
    int clean_count = 0;
    DetectionResult detection;
    CurriculumState curriculum;
    PseudoLabelOutcome pseudo;
    Vec epoch_losses;      // mean per-batch L_sum per epoch
    Vec epoch_mix_losses;  // mean per-batch L_mix per epoch
    Vec epoch_sim_losses;  // mean per-batch L_sim per epoch
};

// One client round (fedcni mode): build prototypes from the working labels
// (given labels overridden by the previous round's confident corrections),
// detect noise over the given-label class sets, update the curriculum and
// pseudo-label (after warm-up), then E epochs of SGD on the selected loss.
// The round's corrected labels drive this round's loss and the next round's
// prototypes; the given-label class structure itself is never rewritten, so
// detection sees a stationary partition of the data. state and proto_labels
// persist across rounds and are updated in place (proto_labels may start
// empty). forced_detection bypasses the detector when non-null.
LocalTrainReport local_train(const ModelParams& global_params, const ClientDataset& dataset,
                             CurriculumState& state, std::vector<int>& proto_labels,
                             const LossSpec& spec, const TrainHyper& hyper, int num_classes,
                             LocalMode mode, bool warmup, std::uint64_t seed,
                             const DetectionResult* forced_detection = nullptr);

}  // namespace fedcni
