#include "risfarm/link.hpp"

#include <cmath>
#include <numbers>

namespace risfarm {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double wrap_angle(double theta) {
    double w = std::fmod(theta, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;  // fmod rounding at the boundary
    return w;
}

std::vector<cdouble> PhaseShift::phasors() const {
    std::vector<cdouble> p(theta.size());
    for (std::size_t n = 0; n < theta.size(); ++n) p[n] = std::polar(1.0, theta[n]);
    return p;
}

double Beamformer::power() const {
    double p = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) p += std::norm(w.data()[i]);
    return p;
}

CMatrix effective_channel(const ChannelState& state, const PhaseShift& phase) {
    const std::size_t k_users = state.h2.rows();
    const std::size_t n = state.h2.cols();
    const std::size_t m = state.h1.cols();
    if (state.h1.rows() != n)
        throw std::invalid_argument("effective_channel: h1/h2 RIS dimensions differ");
    if (phase.theta.size() != n)
        throw std::invalid_argument("effective_channel: phase length != RIS size");

    const std::vector<cdouble> phi = phase.phasors();
    CMatrix h(k_users, m);
    for (std::size_t k = 0; k < k_users; ++k) {
        cdouble* row = h.data() + k * m;
        for (std::size_t j = 0; j < n; ++j) {
            const cdouble c = state.h2.at(k, j) * phi[j];
            const cdouble* h1row = state.h1.data() + j * m;
            for (std::size_t i = 0; i < m; ++i) row[i] += c * h1row[i];
        }
    }
    return h;
}

std::vector<double> sinr_per_user(const CMatrix& h_eff, const Beamformer& w, double noise_w) {
    if (!(noise_w > 0.0)) throw std::invalid_argument("sinr_per_user: noise power must be positive");
    const CMatrix f = matmul(h_eff, w.w);
    return link_report_from_products(f, noise_w, w.power()).sinr;
}

std::pair<std::vector<double>, double> rates(const std::vector<double>& sinr) {
    std::vector<double> r(sinr.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < sinr.size(); ++k) {
        if (sinr[k] < 0.0) throw std::invalid_argument("rates: negative SINR");
        r[k] = std::log2(1.0 + sinr[k]);
        sum += r[k];
    }
    return {r, sum};
}

Beamformer project_power(const CMatrix& w_raw, double p_max) {
    Beamformer b{w_raw};
    const double p = b.power();
    if (p > p_max) b.w *= std::sqrt(p_max / p);
    return b;
}

Beamformer normalize_power(const CMatrix& w_raw, double p_max) {
    Beamformer b{w_raw};
    const double p = b.power();
    if (!(p > 0.0)) throw std::invalid_argument("normalize_power: zero beamformer");
    b.w *= std::sqrt(p_max / p);
    return b;
}

PhaseShift project_unit_modulus(const std::vector<cdouble>& phi_raw) {
    PhaseShift p;
    p.theta.resize(phi_raw.size());
    for (std::size_t n = 0; n < phi_raw.size(); ++n) {
        const cdouble z = phi_raw[n];
        p.theta[n] = (z == cdouble{}) ? 0.0 : wrap_angle(std::atan2(z.imag(), z.real()));
    }
    return p;
}

LinkReport link_report_from_products(const CMatrix& f, double noise_w, double tx_power) {
    const std::size_t k_users = f.rows();
    LinkReport rep;
    rep.sinr.resize(k_users);
    rep.tx_power = tx_power;
    for (std::size_t k = 0; k < k_users; ++k) {
        double signal = 0.0, interference = 0.0;
        for (std::size_t i = 0; i < f.cols(); ++i) {
            const double p = std::norm(f.at(k, i));
            if (i == k)
                signal = p;
            else
                interference += p;
        }
        rep.sinr[k] = signal / (interference + noise_w);
    }
    auto [r, sum] = rates(rep.sinr);
    rep.rate = std::move(r);
    rep.sum_rate = sum;
    return rep;
}

LinkReport evaluate_link(const ChannelState& state, const Beamformer& w, const PhaseShift& phase,
                         double noise_w) {
    const CMatrix h_eff = effective_channel(state, phase);
    const CMatrix f = matmul(h_eff, w.w);
    return link_report_from_products(f, noise_w, w.power());
}

}  // namespace risfarm
