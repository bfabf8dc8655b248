#pragma once

#include <utility>
#include <vector>

#include "risfarm/channel.hpp"
#include "risfarm/numerics.hpp"

namespace risfarm {

/// RIS element phases; the implied reflection matrix is diag(e^{j theta_n}).
struct PhaseShift {
    std::vector<double> theta;  // radians, normalized to [0, 2pi)

    static PhaseShift zeros(std::size_t n) { return PhaseShift{std::vector<double>(n, 0.0)}; }
    std::vector<cdouble> phasors() const;
};

/// Transmit beamformer, column k serves user k.
struct Beamformer {
    CMatrix w;  // M x K

    double power() const;  // tr(W^H W)
};

struct LinkReport {
    std::vector<double> sinr;  // linear, per user
    std::vector<double> rate;  // bits/s/Hz, per user
    double sum_rate = 0.0;
    double tx_power = 0.0;
};

double wrap_angle(double theta);  // into [0, 2pi)

/// Row k equals h2[k,:] * diag(e^{j theta}) * h1.
CMatrix effective_channel(const ChannelState& state, const PhaseShift& phase);

std::vector<double> sinr_per_user(const CMatrix& h_eff, const Beamformer& w, double noise_w);

/// R_k = log2(1 + SINR_k). Throws on negative input.
std::pair<std::vector<double>, double> rates(const std::vector<double>& sinr);

/// Scales all columns uniformly only when tr(W^H W) exceeds p_max.
Beamformer project_power(const CMatrix& w_raw, double p_max);

/// Scales columns so tr(W^H W) equals p_max exactly.
Beamformer normalize_power(const CMatrix& w_raw, double p_max);

/// theta_n = arg(phi_n); exact zeros map to phase 0.
PhaseShift project_unit_modulus(const std::vector<cdouble>& phi_raw);

/// SINR/rate report from the product matrix f = h_eff * W.
LinkReport link_report_from_products(const CMatrix& f, double noise_w, double tx_power);

/// Full evaluation of a (W, phase) design on a channel state.
LinkReport evaluate_link(const ChannelState& state, const Beamformer& w, const PhaseShift& phase,
                         double noise_w);

}  // namespace risfarm
