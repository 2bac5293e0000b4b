#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcni/types.hpp"

namespace fedcni {

struct ModelDims {
    int input = 0;    // d
    int hidden = 0;   // h
    int classes = 0;  // C

    bool operator==(const ModelDims&) const = default;
};

// Two-layer MLP: x -> ReLU(W1^T x + b1) -> softmax(W2^T a + b2).
// The hidden activation is the embedding; the softmax head the prediction.
// W1 is d-by-h row-major, W2 is h-by-C row-major.
struct ModelParams {
    ModelDims dims;
    Vec w1, b1, w2, b2;

    static ModelParams zeros(ModelDims dims);
    // Per-layer uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) init.
    static ModelParams init(ModelDims dims, std::uint64_t seed);

    std::size_t num_params() const {
        return w1.size() + b1.size() + w2.size() + b2.size();
    }
    bool same_shape(const ModelParams& other) const;

    // this += alpha * other (shapes must match).
    void axpy(double alpha, const ModelParams& other);
    void scale(double alpha);

    // Flat layout: w1 row-major, b1, w2 row-major, b2.
    Vec flatten() const;
    static ModelParams unflatten(ModelDims dims, const Vec& flat);
    // Raw little-endian doubles in the flat layout above.
    std::string to_bytes() const;
    static ModelParams from_bytes(ModelDims dims, const std::string& bytes);
};

struct Optimizer {
    double learning_rate = 0.01;
    double momentum = 0.5;
    ModelParams velocity;

    static Optimizer make(double lr, double momentum, ModelDims dims);
};

// v <- momentum * v + grad; params <- params - lr * v.
void sgd_step(ModelParams& params, Optimizer& opt, const ModelParams& grad);

Vec embed(const ModelParams& params, const Vec& x);
Vec predict(const ModelParams& params, const Vec& x);

// Mini-batch with soft (probability-vector) labels. ids are used only for
// error reporting; -1 when unknown.
struct SoftBatch {
    std::vector<Vec> features;
    std::vector<Vec> labels;
    std::vector<long> ids;

    std::size_t size() const { return features.size(); }
    void push(Vec f, Vec l, long id = -1);
};

struct LossGrad {
    double loss = 0.0;
    ModelParams grad;
};

// Mean soft-label cross-entropy -sum_c y_c log p_c over the batch and its
// gradient. Throws NumericError (with the sample id) on non-finite values.
LossGrad cross_entropy_backward(const ModelParams& params, const SoftBatch& batch);
double cross_entropy_loss(const ModelParams& params, const SoftBatch& batch);

// Mean (1 - cos(prototype[target[i]], embed(x_i))) over the given samples
// and its gradient. Prototypes are constants: no gradient flows into them.
// Empty input gives loss 0 and a zero gradient.
LossGrad similarity_backward(const ModelParams& params,
                             const std::vector<Vec>& prototypes,
                             const std::vector<Vec>& features,
                             const std::vector<int>& targets);

Vec one_hot(int label, int num_classes);

}  // namespace fedcni
