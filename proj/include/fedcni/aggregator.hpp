#pragma once

#include <span>
#include <vector>

#include "fedcni/model.hpp"
#include "fedcni/types.hpp"

namespace fedcni {

enum class AggregationMode { fedcni_switching, fedavg };

struct AggregationPolicy {
    int switch_round = 15;  // T_s: first round that weights by clean size
    AggregationMode mode = AggregationMode::fedcni_switching;
};

struct ClientUpdate {
    const ModelParams* params = nullptr;
    int client_id = 0;
    int data_size = 0;   // |D_k|
    int clean_size = 0;  // |C_k|
};

struct AggregateResult {
    ModelParams params;
    Vec weights;
    // True when the clean-size branch had no clean samples anywhere and the
    // round fell back to data-size weights.
    bool clean_fallback = false;
};

// theta <- sum_k w_k theta_k with w_k = |D_k|/N before the switch round (and
// always in fedavg mode), w_k = |C_k|/M from the switch round on.
AggregateResult aggregate(std::span<const ClientUpdate> updates, int round,
                          const AggregationPolicy& policy);

}  // namespace fedcni
