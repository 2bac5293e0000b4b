#include "fedcni/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedcni/errors.hpp"
#include "fedcni/gmm.hpp"

namespace fedcni {

PrototypeSet build_prototypes(const ModelParams& params, const ClientDataset& dataset,
                              const std::vector<int>& labels, int num_classes) {
    if (labels.size() != dataset.samples.size()) {
        throw ShapeError("build_prototypes: one label per sample required");
    }
    PrototypeSet set;
    set.prototypes.assign(num_classes, Vec(params.dims.hidden, 0.0));
    set.counts.assign(num_classes, 0);
    set.valid.assign(num_classes, false);

    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const int c = labels[i];
        const Vec f = embed(params, dataset.samples[i].features);
        for (int j = 0; j < params.dims.hidden; ++j) set.prototypes[c][j] += f[j];
        set.counts[c] += 1;
    }
    for (int c = 0; c < num_classes; ++c) {
        if (set.counts[c] > 0) {
            set.valid[c] = true;
            for (double& v : set.prototypes[c]) v /= set.counts[c];
        }
    }
    return set;
}

double cosine_similarity(const Vec& p, const Vec& f) {
    if (p.size() != f.size()) throw ShapeError("cosine_similarity: length mismatch");
    double pp = 0.0, ff = 0.0, pf = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        pp += p[i] * p[i];
        ff += f[i] * f[i];
        pf += p[i] * f[i];
    }
    const double np = std::sqrt(pp), nf = std::sqrt(ff);
    if (np < 1e-12 || nf < 1e-12) return 0.0;
    return pf / (np * nf);
}

namespace {

void check_partition(const DetectionResult& r, int n) {
    std::vector<char> seen(n, 0);
    for (int i : r.clean_indices) seen[i] += 1;
    for (int i : r.noisy_indices) seen[i] += 1;
    for (int i = 0; i < n; ++i) {
        if (seen[i] != 1) {
            throw NumericError("detection split is not a partition at sample index " +
                               std::to_string(i));
        }
    }
}

void finalize(DetectionResult& r, int n) {
    r.is_noisy.assign(n, 0);
    for (int i : r.noisy_indices) r.is_noisy[i] = 1;
    std::sort(r.clean_indices.begin(), r.clean_indices.end());
    std::sort(r.noisy_indices.begin(), r.noisy_indices.end());
    check_partition(r, n);
}

}  // namespace

DetectionResult detect_noise(const ModelParams& params, const ClientDataset& dataset,
                             const std::vector<int>& labels, int num_classes,
                             int min_class_size) {
    const PrototypeSet protos = build_prototypes(params, dataset, labels, num_classes);
    return detect_noise(params, dataset, labels, protos, num_classes, min_class_size);
}

DetectionResult detect_noise(const ModelParams& params, const ClientDataset& dataset,
                             const std::vector<int>& labels, const PrototypeSet& protos,
                             int num_classes, int min_class_size) {
    const int n = dataset.size();
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("detect_noise: one label per sample required");
    }

    DetectionResult result;
    result.scores.assign(n, 0.0);

    std::vector<std::vector<int>> members(num_classes);
    for (int i = 0; i < n; ++i) members[labels[i]].push_back(i);

    for (int c = 0; c < num_classes; ++c) {
        if (members[c].empty()) continue;
        // a class can lose all its members to label correction; its samples
        // are then scored against a zero prototype (similarity 0)
        const Vec& proto = protos.prototypes[c];
        Vec sims(members[c].size());
        for (std::size_t m = 0; m < members[c].size(); ++m) {
            const Vec f = embed(params, dataset.samples[members[c][m]].features);
            sims[m] = cosine_similarity(proto, f);
            result.scores[members[c][m]] = sims[m];
        }

        PerClassSplit split;
        if (static_cast<int>(members[c].size()) < min_class_size) {
            split.clean = members[c];  // too small to fit; cautious default
        } else {
            const GmmFit fit = fit_gmm(sims);
            auto [low, high] = split_by_component(fit);
            for (int m : low) split.noisy.push_back(members[c][m]);
            for (int m : high) split.clean.push_back(members[c][m]);
        }
        result.clean_indices.insert(result.clean_indices.end(), split.clean.begin(),
                                    split.clean.end());
        result.noisy_indices.insert(result.noisy_indices.end(), split.noisy.begin(),
                                    split.noisy.end());
        result.per_class_splits[c] = std::move(split);
    }
    finalize(result, n);
    return result;
}

DetectionResult small_loss_detect(const ModelParams& params, const ClientDataset& dataset,
                                  const std::vector<int>& labels, int num_classes) {
    const int n = dataset.size();
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("small_loss_detect: one label per sample required");
    }

    DetectionResult result;
    result.scores.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        SoftBatch one;
        one.push(dataset.samples[i].features, one_hot(labels[i], num_classes),
                 dataset.samples[i].id);
        result.scores[i] = cross_entropy_loss(params, one);
    }

    std::vector<char> noisy_flag(n, 0);
    if (n >= 2) {
        const GmmFit fit = fit_gmm(result.scores);
        // noisy iff the high-loss component clearly owns the point; ties and
        // degenerate fits stay clean
        for (int i = 0; i < n; ++i) {
            noisy_flag[i] = !fit.degenerate && fit.responsibilities[i][1] > 0.5;
        }
    }
    for (int i = 0; i < n; ++i) {
        auto& split = result.per_class_splits[labels[i]];
        if (noisy_flag[i]) {
            result.noisy_indices.push_back(i);
            split.noisy.push_back(i);
        } else {
            result.clean_indices.push_back(i);
            split.clean.push_back(i);
        }
    }
    finalize(result, n);
    return result;
}

DetectionResult all_clean_detection(int n) {
    DetectionResult result;
    result.scores.assign(n, 0.0);
    result.clean_indices.resize(n);
    for (int i = 0; i < n; ++i) result.clean_indices[i] = i;
    result.is_noisy.assign(n, 0);
    return result;
}

std::pair<double, double> detection_metrics(const DetectionResult& result,
                                            const ClientDataset& dataset) {
    int actually_noisy = 0, true_pos = 0;
    for (const Sample& s : dataset.samples) {
        if (s.given_label != s.true_label) ++actually_noisy;
    }
    for (int i : result.noisy_indices) {
        const Sample& s = dataset.samples[i];
        if (s.given_label != s.true_label) ++true_pos;
    }
    const double precision =
        result.noisy_indices.empty()
            ? 1.0
            : static_cast<double>(true_pos) / static_cast<double>(result.noisy_indices.size());
    const double recall =
        actually_noisy == 0 ? 1.0
                            : static_cast<double>(true_pos) / static_cast<double>(actually_noisy);
    return {precision, recall};
}

}  // namespace fedcni
