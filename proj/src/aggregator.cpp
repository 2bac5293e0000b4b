#include "fedcni/aggregator.hpp"

#include <numeric>
#include <string>

#include "fedcni/errors.hpp"

namespace fedcni {

AggregateResult aggregate(std::span<const ClientUpdate> updates, int round,
                          const AggregationPolicy& policy) {
    if (updates.empty()) throw AggregationError("aggregate: no client updates");
    const ModelDims dims = updates.front().params->dims;
    for (const ClientUpdate& u : updates) {
        if (u.params->dims != dims) {
            throw AggregationError("aggregate: parameter shape mismatch for client " +
                                   std::to_string(u.client_id));
        }
        if (u.data_size <= 0) {
            throw AggregationError("aggregate: client " + std::to_string(u.client_id) +
                                   " reports empty dataset");
        }
    }

    const bool clean_branch = policy.mode == AggregationMode::fedcni_switching &&
                              round >= policy.switch_round;

    AggregateResult result;
    long total = 0;
    if (clean_branch) {
        for (const ClientUpdate& u : updates) total += u.clean_size;
    }
    if (!clean_branch || total == 0) {
        // data-size weighting; also the fallback when no client has a clean
        // sample (the clean branch is undefined at M = 0)
        result.clean_fallback = clean_branch;
        total = 0;
        for (const ClientUpdate& u : updates) total += u.data_size;
    }

    result.params = ModelParams::zeros(dims);
    result.weights.reserve(updates.size());
    for (const ClientUpdate& u : updates) {
        const long size = (clean_branch && !result.clean_fallback) ? u.clean_size : u.data_size;
        const double w = static_cast<double>(size) / static_cast<double>(total);
        result.weights.push_back(w);
        if (w != 0.0) result.params.axpy(w, *u.params);
    }
    return result;
}

}  // namespace fedcni
