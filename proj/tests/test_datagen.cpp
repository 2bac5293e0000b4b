#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fedcni/datagen.hpp"
#include "fedcni/errors.hpp"

using namespace fedcni;

namespace {

bool samples_equal(const Sample& a, const Sample& b) {
    return a.id == b.id && a.given_label == b.given_label && a.true_label == b.true_label &&
           a.features == b.features;
}

std::vector<Sample> bare_samples(const std::vector<int>& class_sizes) {
    std::vector<Sample> out;
    long id = 0;
    for (std::size_t c = 0; c < class_sizes.size(); ++c) {
        for (int i = 0; i < class_sizes[c]; ++i) {
            Sample s;
            s.features = {0.0};
            s.given_label = static_cast<int>(c);
            s.true_label = static_cast<int>(c);
            s.id = id++;
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("blobs are bit-identical for a fixed seed") {
    const auto [train_a, test_a] = generate_blobs(2, 2, {10, 10}, 0.5, 99);
    const auto [train_b, test_b] = generate_blobs(2, 2, {10, 10}, 0.5, 99);
    REQUIRE(train_a.size() == train_b.size());
    REQUIRE(test_a.size() == test_b.size());
    for (std::size_t i = 0; i < train_a.size(); ++i) CHECK(samples_equal(train_a[i], train_b[i]));
    for (std::size_t i = 0; i < test_a.size(); ++i) CHECK(samples_equal(test_a[i], test_b[i]));
}

TEST_CASE("vanishing spread collapses a class onto its center") {
    const auto [train, test] = generate_blobs(2, 3, {5, 5}, 1e-12, 1);
    Vec first;
    for (const Sample& s : train) {
        if (s.true_label != 0) continue;
        if (first.empty()) {
            first = s.features;
        } else {
            for (std::size_t d = 0; d < first.size(); ++d) {
                CHECK(s.features[d] == doctest::Approx(first[d]).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("10x500 blobs give exactly 4000 train and 1000 test with exact class counts") {
    const auto [train, test] = generate_blobs(10, 20, std::vector<int>(10, 500), 0.31, 7);
    CHECK(train.size() == 4000);
    CHECK(test.size() == 1000);
    std::map<int, int> train_counts, test_counts;
    std::set<long> ids;
    for (const Sample& s : train) {
        train_counts[s.true_label]++;
        CHECK(s.given_label == s.true_label);
        ids.insert(s.id);
    }
    for (const Sample& s : test) {
        test_counts[s.true_label]++;
        ids.insert(s.id);
    }
    for (int c = 0; c < 10; ++c) {
        CHECK(train_counts[c] == 400);
        CHECK(test_counts[c] == 100);
    }
    CHECK(ids.size() == 5000);  // globally unique ids, test disjoint from train
}

TEST_CASE("blob preconditions") {
    CHECK_THROWS_AS(generate_blobs(1, 2, {5}, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(generate_blobs(2, 1, {5, 5}, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(generate_blobs(2, 2, {5, 1}, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(generate_blobs(2, 2, {5, 5}, 0.0, 1), ConfigError);
}

TEST_CASE("single client partition holds every index") {
    const auto train = bare_samples({7, 5});
    const auto parts = dirichlet_partition(train, 1, 0.7, 3);
    REQUIRE(parts.size() == 1);
    std::vector<int> sorted = parts[0];
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 12; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("huge alpha concentrates to an even split") {
    const auto train = bare_samples({1000, 1000});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto parts = dirichlet_partition(train, 2, 1e6, seed);
        for (const auto& part : parts) {
            int per_class[2] = {0, 0};
            for (int idx : part) per_class[train[idx].given_label]++;
            CHECK(per_class[0] >= 475);
            CHECK(per_class[0] <= 525);
            CHECK(per_class[1] >= 475);
            CHECK(per_class[1] <= 525);
        }
    }
}

TEST_CASE("partition is exact and disjoint across clients") {
    const auto train = bare_samples({40, 25, 60});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto parts = dirichlet_partition(train, 7, 0.3, seed);
        std::vector<int> all;
        for (const auto& part : parts) {
            CHECK(!part.empty());
            all.insert(all.end(), part.begin(), part.end());
        }
        std::sort(all.begin(), all.end());
        REQUIRE(all.size() == train.size());
        for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == static_cast<int>(i));
    }
}

TEST_CASE("partition preconditions") {
    const auto train = bare_samples({3});
    CHECK_THROWS_AS(dirichlet_partition(train, 0, 0.7, 1), ConfigError);
    CHECK_THROWS_AS(dirichlet_partition(train, 2, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(dirichlet_partition(train, 4, 0.7, 1), ConfigError);
}

TEST_CASE("noise levels concentrate at mu for tiny sigma") {
    const auto levels = sample_noise_levels(8, 0.4, 1e-9, 5);
    for (double lv : levels) CHECK(lv == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("noise level Monte-Carlo mean sits in the truncated-Gaussian band") {
    const auto levels = sample_noise_levels(10000, 0.4, 0.2, 11);
    double mean = 0.0;
    for (double lv : levels) {
        CHECK(lv >= 0.0);
        CHECK(lv <= 1.0);
        mean += lv;
    }
    mean /= static_cast<double>(levels.size());
    CHECK(mean >= 0.38);
    CHECK(mean <= 0.46);
}

TEST_CASE("noise level preconditions") {
    CHECK_THROWS_AS(sample_noise_levels(4, -1.0, 0.2, 1), ConfigError);
    CHECK_THROWS_AS(sample_noise_levels(4, 2.0, 0.2, 1), ConfigError);
    CHECK_THROWS_AS(sample_noise_levels(4, 0.4, 0.0, 1), ConfigError);
}

namespace {

ClientDataset blob_client(int n, int num_classes, std::uint64_t seed) {
    const auto [train, test] = generate_blobs(
        num_classes, num_classes, std::vector<int>(num_classes, n / num_classes + 2), 0.3, seed);
    ClientDataset client;
    client.client_id = 0;
    client.samples.assign(train.begin(), train.begin() + n);
    return client;
}

}  // namespace

TEST_CASE("zero noise level leaves labels untouched") {
    const ClientDataset before = blob_client(50, 5, 2);
    const ClientDataset after = corrupt_labels(before, 0.0, NoiseType::symmetric, 5, 9);
    CHECK(after.noise_level == 0.0);
    for (std::size_t i = 0; i < before.samples.size(); ++i) {
        CHECK(samples_equal(before.samples[i], after.samples[i]));
    }
}

TEST_CASE("full pair flip maps class 3 to class 4") {
    ClientDataset client;
    for (int i = 0; i < 20; ++i) {
        Sample s;
        s.features = {1.0};
        s.given_label = 3;
        s.true_label = 3;
        s.id = i;
        client.samples.push_back(std::move(s));
    }
    const ClientDataset after = corrupt_labels(client, 1.0, NoiseType::pair, 10, 4);
    CHECK(after.noise_level == 1.0);
    for (const Sample& s : after.samples) {
        CHECK(s.given_label == 4);
        CHECK(s.true_label == 3);
    }
}

TEST_CASE("symmetric corruption flips exactly round(level*n) samples") {
    const ClientDataset before = blob_client(100, 10, 21);
    const ClientDataset after = corrupt_labels(before, 0.4, NoiseType::symmetric, 10, 17);
    int flipped = 0;
    for (std::size_t i = 0; i < after.samples.size(); ++i) {
        const Sample& a = before.samples[i];
        const Sample& b = after.samples[i];
        CHECK(a.features == b.features);
        CHECK(a.true_label == b.true_label);
        CHECK(b.given_label >= 0);
        CHECK(b.given_label < 10);
        if (b.given_label != b.true_label) ++flipped;
    }
    CHECK(flipped == 40);
    CHECK(after.noise_level == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("corruption precondition") {
    const ClientDataset client = blob_client(10, 2, 1);
    CHECK_THROWS_AS(corrupt_labels(client, 1.5, NoiseType::symmetric, 2, 1), ConfigError);
}

TEST_CASE("federation snapshot JSON round-trips exactly") {
    const auto [train, test] = generate_blobs(3, 3, {6, 6, 6}, 0.4, 31);
    FederationData data;
    data.num_classes = 3;
    data.feature_dim = 3;
    data.test_set = test;
    ClientDataset client;
    client.client_id = 0;
    client.samples = train;
    data.clients.push_back(corrupt_labels(std::move(client), 0.25, NoiseType::pair, 3, 8));

    const FederationData back = federation_from_json(federation_to_json(data));
    CHECK(back.num_classes == data.num_classes);
    CHECK(back.feature_dim == data.feature_dim);
    REQUIRE(back.clients.size() == 1);
    CHECK(back.clients[0].noise_level == data.clients[0].noise_level);
    REQUIRE(back.clients[0].samples.size() == data.clients[0].samples.size());
    for (std::size_t i = 0; i < back.clients[0].samples.size(); ++i) {
        CHECK(samples_equal(back.clients[0].samples[i], data.clients[0].samples[i]));
    }
    REQUIRE(back.test_set.size() == data.test_set.size());
    for (std::size_t i = 0; i < back.test_set.size(); ++i) {
        CHECK(samples_equal(back.test_set[i], data.test_set[i]));
    }
}
