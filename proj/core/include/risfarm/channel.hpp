#pragma once

#include <string>
#include <vector>

#include "risfarm/numerics.hpp"

namespace risfarm {

enum class PathlossMode { tr36873, paper_literal };

std::string to_string(PathlossMode mode);
PathlossMode pathloss_mode_from_string(const std::string& s);

/// Physical layout and hyperparameters of one scenario. Serializes to JSON
/// with exactly these field names; unknown fields are rejected on parse.
struct SystemConfig {
    int m_antennas = 8;   // BS antennas (M)
    int n_ris = 32;       // RIS elements (N), n_ris == n_x * n_y
    int n_x = 8;          // elements per RIS row
    int n_y = 4;          // elements per RIS column
    int k_users = 4;      // single-antenna users (K)

    double p_max = 10.0;           // W
    double noise_density = -174.0; // dBm/Hz
    double bandwidth = 1.0e7;      // Hz
    double fc = 5.0e9;             // Hz
    double rician_k_db = 3.0;      // dB
    double rho = 0.95;             // temporal evolution coefficient, (0,1)

    double d_bs_ris = 50.0;          // m
    std::vector<double> d_ris_user;  // m, one entry per user
    double z_r = 10.0;               // RIS height, m
    double d_a = 0.0299792458;       // antenna spacing, m
    double d_c = 0.0299792458;       // element spacing, m
    double phi_a = 0.0;              // AoA azimuth, [0, 2pi)
    double psi_a = 0.0;              // AoA elevation, [-pi/2, pi/2)
    double phi_d = 0.0;              // AoD, [0, 2pi)
    PathlossMode pathloss_mode = PathlossMode::tr36873;

    double wavelength() const;
    double noise_power_w() const;     // noise_density + 10*log10(bandwidth), in watts
    double rician_k_linear() const;   // 10^(rician_k_db / 10)

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

SystemConfig parse_system_config(const std::string& json_text);
std::string system_config_to_json(const SystemConfig& cfg);

/// Channel pair at one coherence interval: h1 is N x M (BS to RIS),
/// h2 is K x N (RIS to users).
struct ChannelState {
    CMatrix h1;
    CMatrix h2;
    long t = 0;
};

CMatrix steering_bs(const SystemConfig& cfg);   // M x 1, unit-modulus entries
CMatrix steering_ris(const SystemConfig& cfg);  // N x 1, unit-modulus entries

double pathloss_bs_ris_db(double d_m, double fc_hz, PathlossMode mode);
double pathloss_ris_user_db(double d_m, double fc_hz, double z_r_m);

/// Rank-1 LoS structure a_RIS * a_BS^H, every entry unit modulus.
CMatrix los_component(const SystemConfig& cfg);

/// Amplitude factors 10^(-PL_dB/20).
double bs_ris_amplitude(const SystemConfig& cfg);
std::vector<double> ris_user_amplitudes(const SystemConfig& cfg);

/// Deterministic mean of the h1 ensemble (scaled LoS part). h2 has mean zero.
CMatrix h1_mean(const SystemConfig& cfg);

CMatrix draw_h1(const SystemConfig& cfg, Rng& rng);
CMatrix draw_h2(const SystemConfig& cfg, Rng& rng);
ChannelState draw_initial_state(const SystemConfig& cfg, Rng& rng);

/// One AR(1) coherence step for both channels. The recursion runs on the
/// zero-mean fluctuation around the fixed LoS mean, so the ensemble power
/// is stationary for every rho in (0,1).
ChannelState ar_step(const ChannelState& state, const SystemConfig& cfg, Rng& rng);

}  // namespace risfarm
