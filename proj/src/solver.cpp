#include "fedcni/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcni/errors.hpp"
#include "fedcni/rng.hpp"

namespace fedcni {

MixedSample mixup_pair(const MixedSample& a, const MixedSample& b, double lambda) {
    if (a.features.size() != b.features.size() || a.soft_label.size() != b.soft_label.size()) {
        throw ShapeError("mixup_pair: incompatible dimensions");
    }
    MixedSample out;
    out.features.resize(a.features.size());
    out.soft_label.resize(a.soft_label.size());
    for (std::size_t i = 0; i < a.features.size(); ++i) {
        out.features[i] = lambda * a.features[i] + (1.0 - lambda) * b.features[i];
    }
    for (std::size_t i = 0; i < a.soft_label.size(); ++i) {
        out.soft_label[i] = lambda * a.soft_label[i] + (1.0 - lambda) * b.soft_label[i];
    }
    return out;
}

namespace {

double sample_beta(double alpha, std::mt19937_64& rng) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    const double x = gamma(rng);
    const double y = gamma(rng);
    const double s = x + y;
    return s > 0.0 ? x / s : 0.5;
}

}  // namespace

MixedBatch denoise_mixup_batch(std::span<const int> batch_indices,
                               const DetectionResult& detection,
                               const std::vector<int>& working_labels,
                               const ClientDataset& dataset, int num_classes,
                               double mixup_alpha, std::mt19937_64& rng) {
    // clean partners grouped by working class for the noisy branch
    std::vector<std::vector<int>> clean_by_class(num_classes);
    for (int i : detection.clean_indices) clean_by_class[working_labels[i]].push_back(i);
    const std::vector<int>& clean_all = detection.clean_indices;

    MixedBatch out;
    for (int i : batch_indices) {
        const Sample& s = dataset.samples[i];
        MixedSample self{s.features, one_hot(working_labels[i], num_classes)};

        if (detection.is_noisy[i]) {
            const auto& pool = clean_by_class[working_labels[i]];
            if (pool.empty()) {
                // no clean partner of this class: keep the sample as-is
                out.noisy_branch.push(self.features, self.soft_label, s.id);
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                const int j = pool[pick(rng)];
                // partner's working label equals the sample's own by pool construction
                MixedSample other{dataset.samples[j].features,
                                  one_hot(working_labels[j], num_classes)};
                const double lambda = sample_beta(mixup_alpha, rng);
                MixedSample mixed = mixup_pair(self, other, lambda);
                out.noisy_branch.push(std::move(mixed.features), std::move(mixed.soft_label),
                                      s.id);
            }
            out.noisy_members.push_back(i);
        } else {
            if (clean_all.empty()) {
                out.clean_branch.push(self.features, self.soft_label, s.id);
                continue;
            }
            std::uniform_int_distribution<std::size_t> pick(0, clean_all.size() - 1);
            const int j = clean_all[pick(rng)];
            const Sample& partner = dataset.samples[j];
            MixedSample other{partner.features, one_hot(working_labels[j], num_classes)};
            const double lambda = sample_beta(mixup_alpha, rng);
            MixedSample mixed = mixup_pair(self, other, lambda);
            out.clean_branch.push(std::move(mixed.features), std::move(mixed.soft_label), s.id);
        }
    }
    return out;
}

double sim_loss(const ModelParams& params, const PrototypeSet& prototypes,
                const ClientDataset& dataset, std::span<const int> noisy_indices,
                const std::vector<int>& working_labels) {
    if (noisy_indices.empty()) return 0.0;
    double total = 0.0;
    for (int i : noisy_indices) {
        const Vec f = embed(params, dataset.samples[i].features);
        total += 1.0 - cosine_similarity(prototypes.prototypes[working_labels[i]], f);
    }
    return total / static_cast<double>(noisy_indices.size());
}

SumLossGrad sum_loss_backward(const ModelParams& params, const MixedBatch& batch,
                              const PrototypeSet& prototypes, const ClientDataset& dataset,
                              const std::vector<int>& working_labels, const LossSpec& spec) {
    SumLossGrad out;
    out.grad = ModelParams::zeros(params.dims);

    if (batch.noisy_branch.size() > 0) {
        LossGrad g = cross_entropy_backward(params, batch.noisy_branch);
        out.mix_loss += g.loss;
        out.grad.axpy(1.0, g.grad);
    }
    if (batch.clean_branch.size() > 0) {
        LossGrad g = cross_entropy_backward(params, batch.clean_branch);
        out.mix_loss += g.loss;
        out.grad.axpy(1.0, g.grad);
    }

    if (spec.enable_sim_loss && !batch.noisy_members.empty()) {
        std::vector<Vec> features;
        std::vector<int> targets;
        features.reserve(batch.noisy_members.size());
        for (int i : batch.noisy_members) {
            features.push_back(dataset.samples[i].features);
            targets.push_back(working_labels[i]);
        }
        LossGrad g = similarity_backward(params, prototypes.prototypes, features, targets);
        out.sim_loss = g.loss;
        out.grad.axpy(spec.lambda_sim, g.grad);
    }

    out.sum_loss = out.mix_loss + spec.lambda_sim * out.sim_loss;
    return out;
}

namespace {

SoftBatch plain_batch(std::span<const int> batch_indices, const ClientDataset& dataset,
                      const std::vector<int>& labels, int num_classes) {
    SoftBatch b;
    for (int i : batch_indices) {
        b.push(dataset.samples[i].features, one_hot(labels[i], num_classes),
               dataset.samples[i].id);
    }
    return b;
}

}  // namespace

LocalTrainReport local_train(const ModelParams& global_params, const ClientDataset& dataset,
                             CurriculumState& state, std::vector<int>& proto_labels,
                             const LossSpec& spec, const TrainHyper& hyper, int num_classes,
                             LocalMode mode, bool warmup, std::uint64_t seed,
                             const DetectionResult* forced_detection) {
    const int n = dataset.size();

    std::vector<int> given_labels(n);
    for (int i = 0; i < n; ++i) given_labels[i] = dataset.samples[i].given_label;
    if (proto_labels.empty()) proto_labels = given_labels;

    LocalTrainReport report;
    report.updated_params = global_params;

    PrototypeSet prototypes;
    const bool fedcni_mode = mode == LocalMode::fedcni;

    if (fedcni_mode) {
        prototypes = build_prototypes(global_params, dataset, proto_labels, num_classes);
        report.detection = forced_detection
                               ? *forced_detection
                               : detect_noise(global_params, dataset, given_labels,
                                              prototypes, num_classes);
        if (!warmup) {
            if (spec.enable_curriculum) {
                compute_difficulty(global_params, dataset, given_labels, report.detection,
                                   state);
                update_thresholds(state);
                report.pseudo = pseudo_label(global_params, prototypes, dataset, given_labels,
                                             report.detection, state);
                proto_labels = report.pseudo.working_labels;
            }
            state.warmup_done = true;
        }
    } else {
        report.detection = all_clean_detection(n);
    }
    report.curriculum = state;
    report.clean_count = report.detection.clean_count();
    if (report.pseudo.working_labels.empty()) report.pseudo.working_labels = given_labels;

    // this round's corrected labels; only the loss sees them
    const std::vector<int>& working_labels = report.pseudo.working_labels;

    // label source for the plain cross-entropy paths
    std::vector<int> plain_labels;
    if (mode == LocalMode::plain_ce_true) {
        plain_labels.resize(n);
        for (int i = 0; i < n; ++i) plain_labels[i] = dataset.samples[i].true_label;
    }
    const std::vector<int>& labels =
        mode == LocalMode::plain_ce_true ? plain_labels : working_labels;

    auto rng = make_rng(seed);
    Optimizer opt = Optimizer::make(hyper.learning_rate, hyper.momentum, global_params.dims);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    const bool use_mixup = fedcni_mode && !warmup && spec.enable_denoise_mixup;
    const bool use_sim = fedcni_mode && !warmup && spec.enable_sim_loss;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0, epoch_mix = 0.0, epoch_sim = 0.0;
        int batches = 0;

        for (int start = 0; start < n; start += hyper.batch_size) {
            const int end = std::min(start + hyper.batch_size, n);
            std::span<const int> batch_indices(order.data() + start,
                                               static_cast<std::size_t>(end - start));

            double batch_sum = 0.0, batch_mix = 0.0, batch_sim = 0.0;
            ModelParams grad = ModelParams::zeros(global_params.dims);

            if (use_mixup) {
                MixedBatch mixed = denoise_mixup_batch(batch_indices, report.detection,
                                                       working_labels, dataset, num_classes,
                                                       spec.mixup_alpha, rng);
                SumLossGrad slg = sum_loss_backward(report.updated_params, mixed, prototypes,
                                                    dataset, working_labels, spec);
                batch_sum = slg.sum_loss;
                batch_mix = slg.mix_loss;
                batch_sim = slg.sim_loss;
                grad = std::move(slg.grad);
            } else {
                const SoftBatch batch = plain_batch(batch_indices, dataset, labels, num_classes);
                LossGrad g = cross_entropy_backward(report.updated_params, batch);
                batch_mix = g.loss;
                grad = std::move(g.grad);
                if (use_sim) {
                    std::vector<Vec> features;
                    std::vector<int> targets;
                    for (int i : batch_indices) {
                        if (!report.detection.is_noisy[i]) continue;
                        features.push_back(dataset.samples[i].features);
                        targets.push_back(working_labels[i]);
                    }
                    if (!features.empty()) {
                        LossGrad sg = similarity_backward(report.updated_params,
                                                          prototypes.prototypes, features,
                                                          targets);
                        batch_sim = sg.loss;
                        grad.axpy(spec.lambda_sim, sg.grad);
                    }
                }
                batch_sum = batch_mix + spec.lambda_sim * batch_sim;
            }

            sgd_step(report.updated_params, opt, grad);
            epoch_sum += batch_sum;
            epoch_mix += batch_mix;
            epoch_sim += batch_sim;
            ++batches;
        }

        const double inv = batches > 0 ? 1.0 / batches : 0.0;
        report.epoch_losses.push_back(epoch_sum * inv);
        report.epoch_mix_losses.push_back(epoch_mix * inv);
        report.epoch_sim_losses.push_back(epoch_sim * inv);
    }
    return report;
}

}  // namespace fedcni
