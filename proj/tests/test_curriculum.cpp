#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fedcni/curriculum.hpp"
#include "fedcni/errors.hpp"
#include "testutil.hpp"

using namespace fedcni;

namespace {

ModelParams identity_net(int dim) {
    ModelParams p = ModelParams::zeros({dim, dim, dim});
    for (int i = 0; i < dim; ++i) {
        p.w1[i * dim + i] = 1.0;
        p.w2[i * dim + i] = 1.0;
    }
    return p;
}

ClientDataset make_client(const std::vector<Vec>& feats, const std::vector<int>& given,
                          const std::vector<int>& truth) {
    ClientDataset c;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        Sample s;
        s.features = feats[i];
        s.given_label = given[i];
        s.true_label = truth[i];
        s.id = static_cast<long>(i);
        c.samples.push_back(std::move(s));
    }
    return c;
}

DetectionResult detection_with_clean(int n, const std::vector<int>& clean) {
    DetectionResult det;
    det.is_noisy.assign(n, 1);
    det.clean_indices = clean;
    for (int i : clean) det.is_noisy[i] = 0;
    for (int i = 0; i < n; ++i) {
        if (det.is_noisy[i]) det.noisy_indices.push_back(i);
    }
    return det;
}

}  // namespace

TEST_CASE("difficulty is 1 for a fully clean, confident, correct class") {
    // logits = features; (8,0) -> p0 ~ 0.9997, confident and correct
    const ModelParams p = identity_net(2);
    std::vector<Vec> feats(6, Vec{8.0, 0.0});
    std::vector<int> labels(6, 0);
    const auto client = make_client(feats, labels, labels);
    CurriculumState st = CurriculumState::make(0.5, 2);
    compute_difficulty(p, client, labels, detection_with_clean(6, {0, 1, 2, 3, 4, 5}), st);
    CHECK(st.rho_per_class[0] == 1.0);
    CHECK(st.rho_per_class[1] == 0.0);  // no samples of class 1
}

TEST_CASE("difficulty is 0 when no clean sample clears the threshold") {
    const ModelParams p = identity_net(2);
    std::vector<Vec> feats(5, Vec{0.01, 0.0});  // p0 ~ 0.5025, below tau 0.9
    std::vector<int> labels(5, 0);
    const auto client = make_client(feats, labels, labels);
    CurriculumState st = CurriculumState::make(0.9, 2);
    compute_difficulty(p, client, labels, detection_with_clean(5, {0, 1, 2, 3, 4}), st);
    CHECK(st.rho_per_class[0] == 0.0);
}

TEST_CASE("difficulty counts confident-and-correct clean samples over the class size") {
    // class 0 has 10 samples; 8 detected clean; 6 of those confident and correct
    const ModelParams p = identity_net(2);
    std::vector<Vec> feats;
    for (int i = 0; i < 6; ++i) feats.push_back({8.0, 0.0});   // confident, correct
    for (int i = 0; i < 2; ++i) feats.push_back({0.1, 0.0});   // unconfident
    for (int i = 0; i < 2; ++i) feats.push_back({8.0, 0.0});   // detected noisy
    std::vector<int> labels(10, 0);
    const auto client = make_client(feats, labels, labels);
    CurriculumState st = CurriculumState::make(0.9, 2);
    compute_difficulty(p, client, labels, detection_with_clean(10, {0, 1, 2, 3, 4, 5, 6, 7}), st);
    CHECK(st.rho_per_class[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("threshold update follows rho / max(rho) * tau") {
    CurriculumState st = CurriculumState::make(0.5, 2);
    st.rho_per_class = {0.5, 1.0};
    update_thresholds(st);
    CHECK(st.tau_per_class[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(st.tau_per_class[1] == doctest::Approx(0.5).epsilon(1e-12));

    st.rho_per_class = {0.3, 0.3};
    update_thresholds(st);
    CHECK(st.tau_per_class[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(st.tau_per_class[1] == doctest::Approx(0.5).epsilon(1e-12));

    st.rho_per_class = {0.0, 0.0};
    update_thresholds(st);
    CHECK(st.tau_per_class[0] == 0.5);
    CHECK(st.tau_per_class[1] == 0.5);
}

TEST_CASE("thresholds never exceed tau_base") {
    std::mt19937_64 rng(3);
    CurriculumState st = CurriculumState::make(0.7, 8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        for (double& r : st.rho_per_class) r = u(rng);
        update_thresholds(st);
        for (double t : st.tau_per_class) {
            CHECK(t >= 0.0);
            CHECK(t <= 0.7 + 1e-12);
        }
    }
}

TEST_CASE("pseudo label with similarities (0.9, 0.1) at temperature 1") {
    // prototypes on axes; noisy sample embedding with the target cosines
    const ModelParams p = identity_net(3);
    const Vec f = {0.9, 0.1, std::sqrt(1.0 - 0.81 - 0.01)};
    const auto client = make_client({{5, 0, 0}, {0, 5, 0}, f}, {0, 1, 1}, {0, 1, 0});
    const std::vector<int> labels = {0, 1, 1};
    PrototypeSet protos;
    protos.prototypes = {{1, 0, 0}, {0, 1, 0}, {0, 0, 0}};
    protos.counts = {1, 1, 0};
    protos.valid = {true, true, false};

    CurriculumState st = CurriculumState::make(0.5, 3, /*temperature=*/1.0);
    const auto det = detection_with_clean(3, {0, 1});
    const PseudoLabelOutcome out = pseudo_label(p, protos, client, labels, det, st);
    REQUIRE(out.confidences.size() == 1);
    CHECK(out.confidences[0] == doctest::Approx(0.68997).epsilon(1e-4));
    CHECK(out.changed == std::vector<int>{2});
    CHECK(out.working_labels[2] == 0);
    CHECK(out.working_labels[0] == 0);
    CHECK(out.working_labels[1] == 1);
}

TEST_CASE("confidence below the class threshold leaves the label unchanged") {
    const ModelParams p = identity_net(3);
    const Vec f = {0.9, 0.1, std::sqrt(1.0 - 0.81 - 0.01)};
    const auto client = make_client({{5, 0, 0}, {0, 5, 0}, f}, {0, 1, 1}, {0, 1, 0});
    const std::vector<int> labels = {0, 1, 1};
    PrototypeSet protos;
    protos.prototypes = {{1, 0, 0}, {0, 1, 0}, {0, 0, 0}};
    protos.counts = {1, 1, 0};
    protos.valid = {true, true, false};

    CurriculumState st = CurriculumState::make(0.9, 3, 1.0);  // tau 0.9 > 0.690
    const auto out = pseudo_label(p, protos, client, labels, detection_with_clean(3, {0, 1}), st);
    CHECK(out.changed.empty());
    CHECK(out.working_labels == labels);
}

TEST_CASE("uniform similarities over 10 classes give confidence 0.1 and no change") {
    const int C = 10;
    ModelParams p = ModelParams::zeros({C, C, C});
    for (int i = 0; i < C; ++i) p.w1[i * C + i] = 1.0;
    PrototypeSet protos;
    for (int c = 0; c < C; ++c) {
        Vec proto(C, 0.0);
        proto[c] = 1.0;
        protos.prototypes.push_back(proto);
        protos.counts.push_back(1);
        protos.valid.push_back(true);
    }
    // embedding equidistant from all prototypes
    const Vec f(C, 1.0);
    std::vector<Vec> feats = {f};
    std::vector<int> labels = {3};
    const auto client = make_client(feats, labels, labels);
    CurriculumState st = CurriculumState::make(0.5, C, 1.0);
    const auto out = pseudo_label(p, protos, client, labels, detection_with_clean(1, {}), st);
    REQUIRE(out.confidences.size() == 1);
    CHECK(out.confidences[0] == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(out.changed.empty());
}

TEST_CASE("no valid prototypes yields an empty change set") {
    const ModelParams p = identity_net(2);
    const auto client = make_client({{1, 0}}, {0}, {0});
    PrototypeSet protos;
    protos.prototypes = {{0, 0}, {0, 0}};
    protos.counts = {0, 0};
    protos.valid = {false, false};
    CurriculumState st = CurriculumState::make(0.5, 2);
    const auto out = pseudo_label(p, protos, client, {0}, detection_with_clean(1, {}), st);
    CHECK(out.changed.empty());
    CHECK(out.working_labels == std::vector<int>{0});
}

TEST_CASE("raising thresholds can only shrink the changed set") {
    auto sc = testutil::imbalanced_client(60, 12, 0.3, 19);
    const PrototypeSet protos = build_prototypes(sc.params, sc.client, sc.labels, 3);
    const DetectionResult det = detect_noise(sc.params, sc.client, sc.labels, 3);

    CurriculumState lo = CurriculumState::make(0.9, 3);
    lo.tau_per_class = {0.2, 0.2, 0.2};
    CurriculumState hi = lo;
    hi.tau_per_class = {0.6, 0.6, 0.6};

    const auto out_lo = pseudo_label(sc.params, protos, sc.client, sc.labels, det, lo);
    const auto out_hi = pseudo_label(sc.params, protos, sc.client, sc.labels, det, hi);
    for (int i : out_hi.changed) {
        CHECK(std::find(out_lo.changed.begin(), out_lo.changed.end(), i) != out_lo.changed.end());
    }
    // changed is a subset of the detected noisy set
    for (int i : out_lo.changed) CHECK(det.is_noisy[i]);
}

TEST_CASE("pseudo label argmax agrees with the softmax argmax") {
    auto sc = testutil::imbalanced_client(40, 10, 0.3, 29);
    const PrototypeSet protos = build_prototypes(sc.params, sc.client, sc.labels, 3);
    const DetectionResult det = detect_noise(sc.params, sc.client, sc.labels, 3);
    CurriculumState st = CurriculumState::make(0.5, 3);
    st.tau_per_class = {0.0, 0.0, 0.0};  // every assignment passes
    const auto out = pseudo_label(sc.params, protos, sc.client, sc.labels, det, st);

    for (std::size_t k = 0; k < det.noisy_indices.size(); ++k) {
        const int i = det.noisy_indices[k];
        const Vec f = embed(sc.params, sc.client.samples[i].features);
        int best = -1;
        double best_sim = -2.0;
        for (int c = 0; c < 3; ++c) {
            if (!protos.valid[c]) continue;
            const double s = cosine_similarity(protos.prototypes[c], f);
            if (s > best_sim) {
                best_sim = s;
                best = c;
            }
        }
        CHECK(out.working_labels[i] == best);
    }
}

TEST_CASE("pseudo-label accuracy matches a brute-force recount") {
    auto sc = testutil::imbalanced_client(80, 16, 0.25, 37);
    const PrototypeSet protos = build_prototypes(sc.params, sc.client, sc.labels, 3);
    const DetectionResult det = detect_noise(sc.params, sc.client, sc.labels, 3);
    CurriculumState st = CurriculumState::make(0.5, 3);
    const auto out = pseudo_label(sc.params, protos, sc.client, sc.labels, det, st);

    int correct = 0;
    for (int i : out.changed) {
        if (out.working_labels[i] == sc.client.samples[i].true_label) ++correct;
    }
    const double expect =
        out.changed.empty() ? 1.0 : static_cast<double>(correct) / out.changed.size();
    CHECK(pseudo_label_accuracy(out, sc.client) == doctest::Approx(expect).epsilon(1e-12));

    PseudoLabelOutcome empty;
    empty.working_labels = sc.labels;
    CHECK(pseudo_label_accuracy(empty, sc.client) == 1.0);
}
