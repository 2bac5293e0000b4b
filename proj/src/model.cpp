#include "fedcni/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "fedcni/errors.hpp"
#include "fedcni/rng.hpp"

namespace fedcni {

namespace {

void check_dims(const ModelDims& d) {
    if (d.input <= 0 || d.hidden <= 0 || d.classes <= 0) {
        throw ShapeError("model dimensions must be positive");
    }
}

void fill_uniform(Vec& v, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
}

}  // namespace

ModelParams ModelParams::zeros(ModelDims dims) {
    check_dims(dims);
    ModelParams p;
    p.dims = dims;
    p.w1.assign(static_cast<std::size_t>(dims.input) * dims.hidden, 0.0);
    p.b1.assign(dims.hidden, 0.0);
    p.w2.assign(static_cast<std::size_t>(dims.hidden) * dims.classes, 0.0);
    p.b2.assign(dims.classes, 0.0);
    return p;
}

ModelParams ModelParams::init(ModelDims dims, std::uint64_t seed) {
    ModelParams p = zeros(dims);
    auto rng = make_rng(seed);
    const double bound1 = std::sqrt(1.0 / dims.input);
    const double bound2 = std::sqrt(1.0 / dims.hidden);
    fill_uniform(p.w1, bound1, rng);
    fill_uniform(p.b1, bound1, rng);
    fill_uniform(p.w2, bound2, rng);
    fill_uniform(p.b2, bound2, rng);
    return p;
}

bool ModelParams::same_shape(const ModelParams& other) const {
    return dims == other.dims;
}

void ModelParams::axpy(double alpha, const ModelParams& other) {
    if (!same_shape(other)) throw ShapeError("axpy: shape mismatch");
    auto acc = [alpha](Vec& dst, const Vec& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
    };
    acc(w1, other.w1);
    acc(b1, other.b1);
    acc(w2, other.w2);
    acc(b2, other.b2);
}

void ModelParams::scale(double alpha) {
    for (Vec* v : {&w1, &b1, &w2, &b2}) {
        for (double& x : *v) x *= alpha;
    }
}

Vec ModelParams::flatten() const {
    Vec flat;
    flat.reserve(num_params());
    for (const Vec* v : {&w1, &b1, &w2, &b2}) {
        flat.insert(flat.end(), v->begin(), v->end());
    }
    return flat;
}

ModelParams ModelParams::unflatten(ModelDims dims, const Vec& flat) {
    ModelParams p = zeros(dims);
    if (flat.size() != p.num_params()) throw ShapeError("unflatten: size mismatch");
    std::size_t off = 0;
    for (Vec* v : {&p.w1, &p.b1, &p.w2, &p.b2}) {
        std::copy(flat.begin() + off, flat.begin() + off + v->size(), v->begin());
        off += v->size();
    }
    return p;
}

std::string ModelParams::to_bytes() const {
    const Vec flat = flatten();
    std::string bytes(flat.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), flat.data(), bytes.size());
    return bytes;
}

ModelParams ModelParams::from_bytes(ModelDims dims, const std::string& bytes) {
    ModelParams probe = zeros(dims);
    if (bytes.size() != probe.num_params() * sizeof(double)) {
        throw ShapeError("from_bytes: byte length does not match dims");
    }
    Vec flat(probe.num_params());
    std::memcpy(flat.data(), bytes.data(), bytes.size());
    return unflatten(dims, flat);
}

Optimizer Optimizer::make(double lr, double momentum, ModelDims dims) {
    Optimizer opt;
    opt.learning_rate = lr;
    opt.momentum = momentum;
    opt.velocity = ModelParams::zeros(dims);
    return opt;
}

void sgd_step(ModelParams& params, Optimizer& opt, const ModelParams& grad) {
    if (!params.same_shape(grad) || !params.same_shape(opt.velocity)) {
        throw ShapeError("sgd_step: shape mismatch");
    }
    opt.velocity.scale(opt.momentum);
    opt.velocity.axpy(1.0, grad);
    params.axpy(-opt.learning_rate, opt.velocity);
}

namespace {

// z1 = W1^T x + b1 into out (length h).
void hidden_preactivation(const ModelParams& p, const Vec& x, Vec& out) {
    const int d = p.dims.input, h = p.dims.hidden;
    if (static_cast<int>(x.size()) != d) {
        throw ShapeError("input has " + std::to_string(x.size()) +
                         " entries, expected " + std::to_string(d));
    }
    out.assign(p.b1.begin(), p.b1.end());
    for (int i = 0; i < d; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* row = &p.w1[static_cast<std::size_t>(i) * h];
        for (int j = 0; j < h; ++j) out[j] += xi * row[j];
    }
}

// z2 = W2^T a + b2 into out (length C).
void logits_from_embedding(const ModelParams& p, const Vec& a, Vec& out) {
    const int h = p.dims.hidden, c = p.dims.classes;
    out.assign(p.b2.begin(), p.b2.end());
    for (int j = 0; j < h; ++j) {
        const double aj = a[j];
        if (aj == 0.0) continue;
        const double* row = &p.w2[static_cast<std::size_t>(j) * c];
        for (int k = 0; k < c; ++k) out[k] += aj * row[k];
    }
}

double log_sum_exp(const Vec& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

bool all_finite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

struct Forward {
    Vec z1, a, z2, p;
};

void forward_pass(const ModelParams& params, const Vec& x, Forward& f, long id) {
    hidden_preactivation(params, x, f.z1);
    f.a = f.z1;
    for (double& v : f.a) v = std::max(v, 0.0);
    logits_from_embedding(params, f.a, f.z2);
    if (!all_finite(f.z1) || !all_finite(f.z2)) {
        throw NumericError("non-finite activation in forward pass", id);
    }
    const double lz = log_sum_exp(f.z2);
    f.p.resize(f.z2.size());
    for (std::size_t k = 0; k < f.z2.size(); ++k) f.p[k] = std::exp(f.z2[k] - lz);
}

}  // namespace

Vec embed(const ModelParams& params, const Vec& x) {
    Vec z1;
    hidden_preactivation(params, x, z1);
    for (double& v : z1) v = std::max(v, 0.0);
    return z1;
}

Vec predict(const ModelParams& params, const Vec& x) {
    Forward f;
    forward_pass(params, x, f, -1);
    return f.p;
}

void SoftBatch::push(Vec f, Vec l, long id) {
    features.push_back(std::move(f));
    labels.push_back(std::move(l));
    ids.push_back(id);
}

Vec one_hot(int label, int num_classes) {
    Vec v(num_classes, 0.0);
    v[label] = 1.0;
    return v;
}

LossGrad cross_entropy_backward(const ModelParams& params, const SoftBatch& batch) {
    if (batch.size() == 0) throw ShapeError("cross_entropy_backward: empty batch");
    const int d = params.dims.input, h = params.dims.hidden, c = params.dims.classes;

    LossGrad out;
    out.grad = ModelParams::zeros(params.dims);
    Forward f;
    Vec dz2(c), dz1(h);

    for (std::size_t n = 0; n < batch.size(); ++n) {
        const Vec& x = batch.features[n];
        const Vec& t = batch.labels[n];
        const long id = n < batch.ids.size() ? batch.ids[n] : -1;
        if (static_cast<int>(t.size()) != c) {
            throw ShapeError("label vector has wrong length");
        }
        forward_pass(params, x, f, id);

        const double lz = log_sum_exp(f.z2);
        for (int k = 0; k < c; ++k) {
            out.loss -= t[k] * (f.z2[k] - lz);
            dz2[k] = f.p[k] - t[k];
        }

        for (int k = 0; k < c; ++k) out.grad.b2[k] += dz2[k];
        for (int j = 0; j < h; ++j) {
            const double aj = f.a[j];
            double* grow = &out.grad.w2[static_cast<std::size_t>(j) * c];
            double acc = 0.0;
            const double* wrow = &params.w2[static_cast<std::size_t>(j) * c];
            for (int k = 0; k < c; ++k) {
                grow[k] += aj * dz2[k];
                acc += wrow[k] * dz2[k];
            }
            dz1[j] = f.z1[j] > 0.0 ? acc : 0.0;
        }
        for (int j = 0; j < h; ++j) out.grad.b1[j] += dz1[j];
        for (int i = 0; i < d; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            double* grow = &out.grad.w1[static_cast<std::size_t>(i) * h];
            for (int j = 0; j < h; ++j) grow[j] += xi * dz1[j];
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    out.grad.scale(inv);
    return out;
}

double cross_entropy_loss(const ModelParams& params, const SoftBatch& batch) {
    if (batch.size() == 0) throw ShapeError("cross_entropy_loss: empty batch");
    double loss = 0.0;
    Forward f;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const long id = n < batch.ids.size() ? batch.ids[n] : -1;
        forward_pass(params, batch.features[n], f, id);
        const double lz = log_sum_exp(f.z2);
        for (std::size_t k = 0; k < f.z2.size(); ++k) {
            loss -= batch.labels[n][k] * (f.z2[k] - lz);
        }
    }
    return loss / static_cast<double>(batch.size());
}

LossGrad similarity_backward(const ModelParams& params,
                             const std::vector<Vec>& prototypes,
                             const std::vector<Vec>& features,
                             const std::vector<int>& targets) {
    constexpr double kNormFloor = 1e-12;
    LossGrad out;
    out.grad = ModelParams::zeros(params.dims);
    if (features.empty()) return out;
    if (features.size() != targets.size()) {
        throw ShapeError("similarity_backward: features/targets size mismatch");
    }

    const int d = params.dims.input, h = params.dims.hidden;
    Vec z1, df(h), dz1(h);

    for (std::size_t n = 0; n < features.size(); ++n) {
        const Vec& x = features[n];
        const Vec& proto = prototypes.at(targets[n]);
        hidden_preactivation(params, x, z1);
        Vec f = z1;
        for (double& v : f) v = std::max(v, 0.0);

        double pp = 0.0, ff = 0.0, pf = 0.0;
        for (int j = 0; j < h; ++j) {
            pp += proto[j] * proto[j];
            ff += f[j] * f[j];
            pf += proto[j] * f[j];
        }
        const double np = std::sqrt(pp), nf = std::sqrt(ff);
        if (np < kNormFloor || nf < kNormFloor) {
            // cosine pinned to 0 for degenerate vectors; constant term, no gradient
            out.loss += 1.0;
            continue;
        }
        const double cosv = pf / (np * nf);
        out.loss += 1.0 - cosv;

        // d(1-cos)/df = -(p/(|p||f|) - cos * f/|f|^2)
        for (int j = 0; j < h; ++j) {
            df[j] = -(proto[j] / (np * nf) - cosv * f[j] / ff);
            dz1[j] = z1[j] > 0.0 ? df[j] : 0.0;
        }
        for (int j = 0; j < h; ++j) out.grad.b1[j] += dz1[j];
        for (int i = 0; i < d; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            double* grow = &out.grad.w1[static_cast<std::size_t>(i) * h];
            for (int j = 0; j < h; ++j) grow[j] += xi * dz1[j];
        }
    }

    const double inv = 1.0 / static_cast<double>(features.size());
    out.loss *= inv;
    out.grad.scale(inv);
    return out;
}

}  // namespace fedcni
