#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fedcni/aggregator.hpp"
#include "fedcni/errors.hpp"
#include "testutil.hpp"

using namespace fedcni;

namespace {

const ModelDims kDims{3, 4, 2};

std::vector<ClientUpdate> updates_for(const std::vector<ModelParams>& params,
                                      const std::vector<int>& data_sizes,
                                      const std::vector<int>& clean_sizes) {
    std::vector<ClientUpdate> out;
    for (std::size_t k = 0; k < params.size(); ++k) {
        out.push_back({&params[k], static_cast<int>(k), data_sizes[k], clean_sizes[k]});
    }
    return out;
}

}  // namespace

TEST_CASE("data-size weights before the switch round") {
    const std::vector<ModelParams> params = {testutil::random_params(kDims, 1),
                                             testutil::random_params(kDims, 2)};
    const auto updates = updates_for(params, {100, 300}, {10, 10});
    AggregationPolicy policy;
    policy.switch_round = 15;
    const AggregateResult res = aggregate(updates, 3, policy);
    CHECK(res.weights[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(res.weights[1] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(!res.clean_fallback);

    const Vec a = params[0].flatten(), b = params[1].flatten(), got = res.params.flatten();
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(0.25 * a[i] + 0.75 * b[i]).epsilon(1e-12));
    }
}

TEST_CASE("clean-size weights from the switch round on") {
    const std::vector<ModelParams> params = {testutil::random_params(kDims, 3),
                                             testutil::random_params(kDims, 4)};
    const auto updates = updates_for(params, {100, 100}, {50, 150});
    AggregationPolicy policy;
    policy.switch_round = 15;
    const AggregateResult res = aggregate(updates, 15, policy);
    CHECK(res.weights[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(res.weights[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("switch boundary: data sizes at T_s - 1, clean sizes at T_s") {
    const std::vector<ModelParams> params = {testutil::random_params(kDims, 5),
                                             testutil::random_params(kDims, 6)};
    const auto updates = updates_for(params, {100, 300}, {200, 200});
    AggregationPolicy policy;
    policy.switch_round = 15;

    const AggregateResult before = aggregate(updates, 14, policy);
    CHECK(before.weights[0] == doctest::Approx(0.25).epsilon(1e-12));
    const AggregateResult after = aggregate(updates, 15, policy);
    CHECK(after.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fedavg mode ignores clean sizes entirely") {
    const std::vector<ModelParams> params = {testutil::random_params(kDims, 7),
                                             testutil::random_params(kDims, 8)};
    const auto updates = updates_for(params, {100, 300}, {999, 1});
    AggregationPolicy policy;
    policy.switch_round = 0;
    policy.mode = AggregationMode::fedavg;
    const AggregateResult res = aggregate(updates, 50, policy);
    CHECK(res.weights[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("single client aggregation is the identity") {
    const std::vector<ModelParams> params = {testutil::random_params(kDims, 9)};
    const auto updates = updates_for(params, {42}, {17});
    const AggregateResult res = aggregate(updates, 20, AggregationPolicy{});
    CHECK(res.params.flatten() == params[0].flatten());
    CHECK(res.weights == Vec{1.0});
}

TEST_CASE("all-noisy round falls back to data-size weights") {
    const std::vector<ModelParams> params = {testutil::random_params(kDims, 10),
                                             testutil::random_params(kDims, 11)};
    const auto updates = updates_for(params, {100, 300}, {0, 0});
    AggregationPolicy policy;
    policy.switch_round = 15;
    const AggregateResult res = aggregate(updates, 20, policy);
    CHECK(res.clean_fallback);
    CHECK(res.weights[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(res.weights[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("weights sum to one and the average is coordinatewise convex") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 6);
        std::vector<ModelParams> params;
        std::vector<int> data_sizes, clean_sizes;
        for (int i = 0; i < k; ++i) {
            params.push_back(testutil::random_params(kDims, 100 + trial * 10 + i));
            data_sizes.push_back(1 + static_cast<int>(rng() % 500));
            clean_sizes.push_back(static_cast<int>(rng() % (data_sizes.back() + 1)));
        }
        const auto updates = updates_for(params, data_sizes, clean_sizes);
        const int round = static_cast<int>(rng() % 30);
        const AggregateResult res = aggregate(updates, round, AggregationPolicy{});

        double sum = 0.0;
        for (double w : res.weights) sum += w;
        CHECK(std::fabs(sum - 1.0) <= 1e-12);

        const Vec got = res.params.flatten();
        for (std::size_t c = 0; c < got.size(); ++c) {
            double lo = 1e300, hi = -1e300;
            for (const ModelParams& p : params) {
                const Vec f = p.flatten();
                lo = std::min(lo, f[c]);
                hi = std::max(hi, f[c]);
            }
            CHECK(got[c] >= lo - 1e-12);
            CHECK(got[c] <= hi + 1e-12);
        }
    }
}

TEST_CASE("shape mismatch names the offending client") {
    const ModelParams a = testutil::random_params(kDims, 20);
    const ModelParams b = testutil::random_params({3, 5, 2}, 21);
    const std::vector<ClientUpdate> updates = {{&a, 0, 10, 5}, {&b, 7, 10, 5}};
    try {
        aggregate(updates, 0, AggregationPolicy{});
        FAIL("expected AggregationError");
    } catch (const AggregationError& e) {
        CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
}

TEST_CASE("empty update set is an error") {
    CHECK_THROWS_AS(aggregate({}, 0, AggregationPolicy{}), AggregationError);
}
