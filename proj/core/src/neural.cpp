#include "risfarm/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace risfarm::nn {

RMatrix matmul(const RMatrix& a, const RMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("RMatrix matmul: shape mismatch");
    RMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (std::size_t l = 0; l < a.cols; ++l) {
            const double al = arow[l];
            if (al == 0.0) continue;
            const double* brow = b.row(l);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += al * brow[j];
        }
    }
    return c;
}

RMatrix matmul_nt(const RMatrix& a, const RMatrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("RMatrix matmul_nt: shape mismatch");
    RMatrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (std::size_t l = 0; l < a.cols; ++l) s += arow[l] * brow[l];
            crow[j] = s;
        }
    }
    return c;
}

RMatrix matmul_tn(const RMatrix& a, const RMatrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("RMatrix matmul_tn: shape mismatch");
    RMatrix c(a.cols, b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* arow = a.row(r);
        const double* brow = b.row(r);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ai = arow[i];
            if (ai == 0.0) continue;
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += ai * brow[j];
        }
    }
    return c;
}

bool ParamTensor::finite() const {
    for (double x : value)
        if (!std::isfinite(x)) return false;
    return true;
}

void Linear::init(Rng& rng, Activation gain_hint) {
    // He-uniform for relu fan-in, Xavier-uniform otherwise
    const double fan_in = static_cast<double>(w_.cols);
    const double fan_out = static_cast<double>(w_.rows);
    const double limit = gain_hint == Activation::relu ? std::sqrt(6.0 / fan_in)
                                                       : std::sqrt(6.0 / (fan_in + fan_out));
    for (double& x : w_.value) x = rng.uniform(-limit, limit);
    std::fill(b_.value.begin(), b_.value.end(), 0.0);
}

RMatrix Linear::forward(const RMatrix& x) {
    if (x.cols != w_.cols) throw std::invalid_argument("Linear::forward: input width mismatch");
    x_cache_ = x;
    have_forward_ = true;
    RMatrix wm;
    wm.rows = w_.rows;
    wm.cols = w_.cols;
    wm.v = w_.value;
    RMatrix y = matmul_nt(x, wm);
    for (std::size_t i = 0; i < y.rows; ++i) {
        double* yrow = y.row(i);
        for (std::size_t j = 0; j < y.cols; ++j) yrow[j] += b_.value[j];
    }
    return y;
}

RMatrix Linear::backward(const RMatrix& dy, bool accumulate) {
    if (!have_forward_) throw std::logic_error("Linear::backward without forward");
    if (dy.rows != x_cache_.rows || dy.cols != w_.rows)
        throw std::invalid_argument("Linear::backward: upstream shape mismatch");
    if (accumulate) {
        const RMatrix dw = matmul_tn(dy, x_cache_);  // out x in
        for (std::size_t i = 0; i < dw.v.size(); ++i) w_.grad[i] += dw.v[i];
        for (std::size_t i = 0; i < dy.rows; ++i) {
            const double* dyrow = dy.row(i);
            for (std::size_t j = 0; j < dy.cols; ++j) b_.grad[j] += dyrow[j];
        }
    }
    RMatrix wm;
    wm.rows = w_.rows;
    wm.cols = w_.cols;
    wm.v = w_.value;
    return matmul(dy, wm);  // B x in
}

Mlp::Mlp(const std::vector<std::size_t>& layer_sizes, Activation act)
    : sizes_(layer_sizes), act_(act) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
        lin_.emplace_back(sizes_[i], sizes_[i + 1]);
}

void Mlp::init(Rng& rng) {
    for (std::size_t i = 0; i < lin_.size(); ++i) {
        // the output layer is linear; hidden layers follow the activation
        const Activation hint = (i + 1 == lin_.size()) ? Activation::tanh : act_;
        lin_[i].init(rng, hint);
    }
}

RMatrix Mlp::forward(const RMatrix& x) {
    post_act_.clear();
    RMatrix h = x;
    for (std::size_t i = 0; i < lin_.size(); ++i) {
        h = lin_[i].forward(h);
        if (i + 1 < lin_.size()) {
            if (act_ == Activation::relu) {
                for (double& v : h.v) v = v > 0.0 ? v : 0.0;
            } else {
                for (double& v : h.v) v = std::tanh(v);
            }
            post_act_.push_back(h);
        }
    }
    have_forward_ = true;
    return h;
}

std::vector<double> Mlp::forward1(const std::vector<double>& x) {
    return forward(RMatrix::from_row(x)).to_row();
}

RMatrix Mlp::backward(const RMatrix& dy, bool accumulate) {
    if (!have_forward_) throw std::logic_error("Mlp::backward without forward");
    RMatrix d = dy;
    for (std::size_t i = lin_.size(); i-- > 0;) {
        d = lin_[i].backward(d, accumulate);
        if (i > 0) {
            const RMatrix& post = post_act_[i - 1];
            if (act_ == Activation::relu) {
                for (std::size_t j = 0; j < d.v.size(); ++j)
                    d.v[j] = post.v[j] > 0.0 ? d.v[j] : 0.0;
            } else {
                for (std::size_t j = 0; j < d.v.size(); ++j)
                    d.v[j] *= 1.0 - post.v[j] * post.v[j];
            }
        }
    }
    return d;
}

std::vector<ParamTensor*> Mlp::params() {
    std::vector<ParamTensor*> out;
    for (auto& l : lin_) {
        out.push_back(&l.weights());
        out.push_back(&l.bias());
    }
    return out;
}

void Mlp::zero_grad() {
    for (auto* p : params()) p->zero_grad();
}

std::string Mlp::to_json() const {
    nlohmann::json j;
    j["layer_sizes"] = sizes_;
    j["activation"] = act_ == Activation::relu ? "relu" : "tanh";
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : lin_) {
        nlohmann::json e;
        e["w"] = l.weights().value;
        e["b"] = l.bias().value;
        layers.push_back(std::move(e));
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

Mlp Mlp::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const std::string act = j.at("activation").get<std::string>();
    Mlp m(sizes, act == "relu" ? Activation::relu : Activation::tanh);
    const auto& layers = j.at("layers");
    if (layers.size() != m.lin_.size()) throw std::invalid_argument("Mlp::from_json: layer count");
    for (std::size_t i = 0; i < m.lin_.size(); ++i) {
        auto w = layers[i].at("w").get<std::vector<double>>();
        auto b = layers[i].at("b").get<std::vector<double>>();
        if (w.size() != m.lin_[i].weights().size() || b.size() != m.lin_[i].bias().size())
            throw std::invalid_argument("Mlp::from_json: parameter size mismatch");
        m.lin_[i].weights().value = std::move(w);
        m.lin_[i].bias().value = std::move(b);
    }
    return m;
}

void polyak_update(Mlp& dst, const Mlp& src, double tau) {
    Mlp& s = const_cast<Mlp&>(src);
    auto dp = dst.params();
    auto sp = s.params();
    if (dp.size() != sp.size()) throw std::invalid_argument("polyak_update: param sets differ");
    for (std::size_t i = 0; i < dp.size(); ++i) {
        if (dp[i]->size() != sp[i]->size())
            throw std::invalid_argument("polyak_update: shape mismatch");
        for (std::size_t j = 0; j < dp[i]->size(); ++j)
            dp[i]->value[j] = tau * sp[i]->value[j] + (1.0 - tau) * dp[i]->value[j];
    }
}

AdamState::AdamState(const std::vector<ParamTensor*>& params, double lr, double beta1,
                     double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
        shapes_.push_back(p->size());
    }
}

void AdamState::step(const std::vector<ParamTensor*>& params) {
    if (params.size() != shapes_.size())
        throw std::invalid_argument("AdamState::step: parameter set changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        if (p.size() != shapes_[i]) throw std::invalid_argument("AdamState::step: shape changed");
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = p.grad[j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)), stable for any u
double tanh_correction(double u) {
    return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

}  // namespace

GaussianSample gaussian_head_sample_with_noise(const std::vector<double>& mean,
                                               const std::vector<double>& log_std,
                                               const std::vector<double>& eps) {
    if (mean.size() != log_std.size() || mean.size() != eps.size())
        throw std::invalid_argument("gaussian_head_sample: size mismatch");
    GaussianSample s;
    s.eps = eps;
    s.action.resize(mean.size());
    s.pre_tanh.resize(mean.size());
    double lp = 0.0;
    constexpr double kLogSqrt2Pi = 0.9189385332046727;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double ls = std::clamp(log_std[i], kLogStdMin, kLogStdMax);
        const double sd = std::exp(ls);
        const double u = mean[i] + sd * eps[i];
        s.pre_tanh[i] = u;
        s.action[i] = std::tanh(u);
        lp += -0.5 * eps[i] * eps[i] - ls - kLogSqrt2Pi;
        lp -= tanh_correction(u);
    }
    s.log_prob = lp;
    return s;
}

GaussianSample gaussian_head_sample(const std::vector<double>& mean,
                                    const std::vector<double>& log_std, Rng& rng) {
    std::vector<double> eps(mean.size());
    for (double& e : eps) e = rng.gaussian();
    return gaussian_head_sample_with_noise(mean, log_std, eps);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

}  // namespace risfarm::nn
