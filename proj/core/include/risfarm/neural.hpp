#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "risfarm/numerics.hpp"

namespace risfarm::nn {

/// Dense real matrix, row-major. Rows index batch samples.
struct RMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    RMatrix() = default;
    RMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
    double* row(std::size_t i) { return v.data() + i * cols; }
    const double* row(std::size_t i) const { return v.data() + i * cols; }

    static RMatrix from_row(const std::vector<double>& x) {
        RMatrix m(1, x.size());
        m.v = x;
        return m;
    }
    std::vector<double> to_row() const { return v; }
};

RMatrix matmul(const RMatrix& a, const RMatrix& b);     // A * B
RMatrix matmul_nt(const RMatrix& a, const RMatrix& b);  // A * B^T
RMatrix matmul_tn(const RMatrix& a, const RMatrix& b);  // A^T * B

/// Parameter with its gradient accumulator.
struct ParamTensor {
    std::size_t rows = 0, cols = 0;
    std::vector<double> value, grad;

    ParamTensor() = default;
    ParamTensor(std::size_t r, std::size_t c)
        : rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
    bool finite() const;
};

enum class Activation { relu, tanh };

/// Affine layer y = x W^T + b with gradient accumulation.
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out) : w_(out, in), b_(out, 1) {}

    void init(Rng& rng, Activation gain_hint);

    RMatrix forward(const RMatrix& x);
    /// Returns dL/dx; accumulates dL/dW, dL/db unless accumulate is false.
    RMatrix backward(const RMatrix& dy, bool accumulate = true);

    std::size_t in_dim() const { return w_.cols; }
    std::size_t out_dim() const { return w_.rows; }
    ParamTensor& weights() { return w_; }
    ParamTensor& bias() { return b_; }
    const ParamTensor& weights() const { return w_; }
    const ParamTensor& bias() const { return b_; }

private:
    ParamTensor w_, b_;
    RMatrix x_cache_;
    bool have_forward_ = false;
};

/// Multilayer perceptron: affine layers with an elementwise activation
/// between them and a linear output. forward records the tape consumed by
/// the next backward call.
class Mlp {
public:
    Mlp() = default;
    Mlp(const std::vector<std::size_t>& layer_sizes, Activation act);

    void init(Rng& rng);

    RMatrix forward(const RMatrix& x);
    std::vector<double> forward1(const std::vector<double>& x);
    RMatrix backward(const RMatrix& dy, bool accumulate = true);

    std::vector<ParamTensor*> params();
    void zero_grad();
    std::size_t in_dim() const { return sizes_.front(); }
    std::size_t out_dim() const { return sizes_.back(); }
    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    Activation activation() const { return act_; }

    std::string to_json() const;
    static Mlp from_json(const std::string& text);

private:
    std::vector<std::size_t> sizes_;
    Activation act_ = Activation::relu;
    std::vector<Linear> lin_;
    std::vector<RMatrix> post_act_;  // tape
    bool have_forward_ = false;
};

/// Copies src into dst when tau = 1; otherwise dst = tau*src + (1-tau)*dst.
void polyak_update(Mlp& dst, const Mlp& src, double tau);

/// Adam with bias correction over a fixed parameter set.
class AdamState {
public:
    AdamState() = default;
    AdamState(const std::vector<ParamTensor*>& params, double lr, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8);

    void step(const std::vector<ParamTensor*>& params);
    double lr() const { return lr_; }
    long steps() const { return t_; }

private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
    std::vector<std::size_t> shapes_;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct GaussianSample {
    std::vector<double> action;    // tanh-squashed, in (-1, 1)
    std::vector<double> pre_tanh;  // mean + std * eps
    std::vector<double> eps;       // the noise that was used
    double log_prob = 0.0;         // includes the tanh change of variables
};

GaussianSample gaussian_head_sample(const std::vector<double>& mean,
                                    const std::vector<double>& log_std, Rng& rng);
GaussianSample gaussian_head_sample_with_noise(const std::vector<double>& mean,
                                               const std::vector<double>& log_std,
                                               const std::vector<double>& eps);

std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace risfarm::nn
