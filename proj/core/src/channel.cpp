#include "risfarm/channel.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

namespace risfarm {

namespace {
constexpr double kSpeedOfLight = 299792458.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

std::string to_string(PathlossMode mode) {
    return mode == PathlossMode::tr36873 ? "tr36873" : "paper_literal";
}

PathlossMode pathloss_mode_from_string(const std::string& s) {
    if (s == "tr36873") return PathlossMode::tr36873;
    if (s == "paper_literal") return PathlossMode::paper_literal;
    throw std::invalid_argument("unknown pathloss_mode: " + s);
}

double SystemConfig::wavelength() const { return kSpeedOfLight / fc; }

double SystemConfig::noise_power_w() const {
    const double dbm = noise_density + 10.0 * std::log10(bandwidth);
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

double SystemConfig::rician_k_linear() const { return std::pow(10.0, rician_k_db / 10.0); }

void SystemConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("SystemConfig: " + msg); };
    if (m_antennas < 1) fail("m_antennas must be >= 1");
    if (n_ris < 1) fail("n_ris must be >= 1");
    if (k_users < 1) fail("k_users must be >= 1");
    if (k_users > m_antennas) fail("k_users must not exceed m_antennas");
    if (n_x < 1 || n_y < 1 || n_x * n_y != n_ris) fail("n_x * n_y must equal n_ris");
    if (!(rho > 0.0 && rho < 1.0)) fail("rho must lie in (0, 1)");
    if (!(p_max > 0.0)) fail("p_max must be positive");
    if (!(bandwidth > 0.0)) fail("bandwidth must be positive");
    if (!(fc > 0.0)) fail("fc must be positive");
    if (!(d_bs_ris > 0.0)) fail("d_bs_ris must be positive");
    if (d_ris_user.size() != static_cast<std::size_t>(k_users))
        fail("d_ris_user must have one entry per user");
    for (double d : d_ris_user)
        if (!(d > 0.0)) fail("d_ris_user entries must be positive");
    if (!(d_a > 0.0) || !(d_c > 0.0)) fail("antenna/element spacing must be positive");
    if (phi_a < 0.0 || phi_a >= kTwoPi) fail("phi_a must lie in [0, 2pi)");
    if (phi_d < 0.0 || phi_d >= kTwoPi) fail("phi_d must lie in [0, 2pi)");
    if (psi_a < -std::numbers::pi / 2 || psi_a >= std::numbers::pi / 2)
        fail("psi_a must lie in [-pi/2, pi/2)");
}

SystemConfig parse_system_config(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw std::invalid_argument("SystemConfig: document must be an object");

    static const std::set<std::string> known = {
        "m_antennas", "n_ris", "n_x", "n_y", "k_users", "p_max", "noise_density",
        "bandwidth", "fc", "rician_k_db", "rho", "d_bs_ris", "d_ris_user", "z_r",
        "d_a", "d_c", "phi_a", "psi_a", "phi_d", "pathloss_mode"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key))
            throw std::invalid_argument("SystemConfig: unknown field '" + key + "'");
    }
    for (const auto& key : known) {
        if (!j.contains(key))
            throw std::invalid_argument("SystemConfig: missing field '" + key + "'");
    }

    SystemConfig cfg;
    cfg.m_antennas = j.at("m_antennas").get<int>();
    cfg.n_ris = j.at("n_ris").get<int>();
    cfg.n_x = j.at("n_x").get<int>();
    cfg.n_y = j.at("n_y").get<int>();
    cfg.k_users = j.at("k_users").get<int>();
    cfg.p_max = j.at("p_max").get<double>();
    cfg.noise_density = j.at("noise_density").get<double>();
    cfg.bandwidth = j.at("bandwidth").get<double>();
    cfg.fc = j.at("fc").get<double>();
    cfg.rician_k_db = j.at("rician_k_db").get<double>();
    cfg.rho = j.at("rho").get<double>();
    cfg.d_bs_ris = j.at("d_bs_ris").get<double>();
    cfg.d_ris_user = j.at("d_ris_user").get<std::vector<double>>();
    cfg.z_r = j.at("z_r").get<double>();
    cfg.d_a = j.at("d_a").get<double>();
    cfg.d_c = j.at("d_c").get<double>();
    cfg.phi_a = j.at("phi_a").get<double>();
    cfg.psi_a = j.at("psi_a").get<double>();
    cfg.phi_d = j.at("phi_d").get<double>();
    cfg.pathloss_mode = pathloss_mode_from_string(j.at("pathloss_mode").get<std::string>());
    cfg.validate();
    return cfg;
}

std::string system_config_to_json(const SystemConfig& cfg) {
    nlohmann::json j;
    j["m_antennas"] = cfg.m_antennas;
    j["n_ris"] = cfg.n_ris;
    j["n_x"] = cfg.n_x;
    j["n_y"] = cfg.n_y;
    j["k_users"] = cfg.k_users;
    j["p_max"] = cfg.p_max;
    j["noise_density"] = cfg.noise_density;
    j["bandwidth"] = cfg.bandwidth;
    j["fc"] = cfg.fc;
    j["rician_k_db"] = cfg.rician_k_db;
    j["rho"] = cfg.rho;
    j["d_bs_ris"] = cfg.d_bs_ris;
    j["d_ris_user"] = cfg.d_ris_user;
    j["z_r"] = cfg.z_r;
    j["d_a"] = cfg.d_a;
    j["d_c"] = cfg.d_c;
    j["phi_a"] = cfg.phi_a;
    j["psi_a"] = cfg.psi_a;
    j["phi_d"] = cfg.phi_d;
    j["pathloss_mode"] = to_string(cfg.pathloss_mode);
    return j.dump(2);
}

CMatrix steering_bs(const SystemConfig& cfg) {
    const int m = cfg.m_antennas;
    CMatrix a(m, 1);
    const double k = kTwoPi * cfg.d_a * std::sin(cfg.phi_d) / cfg.wavelength();
    for (int i = 0; i < m; ++i) a.at(i, 0) = std::polar(1.0, k * i);
    return a;
}

CMatrix steering_ris(const SystemConfig& cfg) {
    const int n = cfg.n_ris;
    CMatrix a(n, 1);
    const double base = kTwoPi * cfg.d_c / cfg.wavelength();
    const double row_term = std::sin(cfg.phi_a) * std::sin(cfg.psi_a);
    const double col_term = std::sin(cfg.phi_a) * std::cos(cfg.psi_a);
    for (int i = 0; i < n; ++i) {
        const int i1 = i / cfg.n_x;  // planar row index
        const int i2 = i % cfg.n_x;  // index within the row
        a.at(i, 0) = std::polar(1.0, base * (i1 * row_term + i2 * col_term));
    }
    return a;
}

double pathloss_bs_ris_db(double d_m, double fc_hz, PathlossMode mode) {
    const double fc_ghz = fc_hz / 1.0e9;
    const double base = 22.0 * std::log10(d_m) + 28.0;
    if (mode == PathlossMode::tr36873) return base + 20.0 * std::log10(fc_ghz);
    return base + std::log10(fc_ghz);
}

double pathloss_ris_user_db(double d_m, double fc_hz, double z_r_m) {
    const double fc_ghz = fc_hz / 1.0e9;
    return 36.7 * std::log10(d_m) + 22.7 + 26.0 * std::log10(fc_ghz) - 0.3 * (z_r_m - 1.5);
}

CMatrix los_component(const SystemConfig& cfg) {
    const CMatrix a_ris = steering_ris(cfg);
    const CMatrix a_bs = steering_bs(cfg);
    CMatrix l(cfg.n_ris, cfg.m_antennas);
    for (int i = 0; i < cfg.n_ris; ++i)
        for (int j = 0; j < cfg.m_antennas; ++j)
            l.at(i, j) = a_ris.at(i, 0) * std::conj(a_bs.at(j, 0));
    return l;
}

double bs_ris_amplitude(const SystemConfig& cfg) {
    return std::pow(10.0, -pathloss_bs_ris_db(cfg.d_bs_ris, cfg.fc, cfg.pathloss_mode) / 20.0);
}

std::vector<double> ris_user_amplitudes(const SystemConfig& cfg) {
    std::vector<double> a(cfg.d_ris_user.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        a[k] = std::pow(10.0, -pathloss_ris_user_db(cfg.d_ris_user[k], cfg.fc, cfg.z_r) / 20.0);
    return a;
}

CMatrix h1_mean(const SystemConfig& cfg) {
    const double kf = cfg.rician_k_linear();
    const double w_los = std::sqrt(kf / (kf + 1.0));
    return scale(los_component(cfg), bs_ris_amplitude(cfg) * w_los);
}

CMatrix draw_h1(const SystemConfig& cfg, Rng& rng) {
    const double kf = cfg.rician_k_linear();
    const double w_los = std::sqrt(kf / (kf + 1.0));
    const double w_nlos = std::sqrt(1.0 / (kf + 1.0));
    const double amp = bs_ris_amplitude(cfg);

    CMatrix h = los_component(cfg);
    const CMatrix g = draw_cn(rng, cfg.n_ris, cfg.m_antennas);
    for (std::size_t i = 0; i < h.size(); ++i)
        h.data()[i] = amp * (w_los * h.data()[i] + w_nlos * g.data()[i]);
    return h;
}

CMatrix draw_h2(const SystemConfig& cfg, Rng& rng) {
    const std::vector<double> amps = ris_user_amplitudes(cfg);
    CMatrix h = draw_cn(rng, cfg.k_users, cfg.n_ris);
    for (int k = 0; k < cfg.k_users; ++k)
        for (int n = 0; n < cfg.n_ris; ++n) h.at(k, n) *= amps[k];
    return h;
}

ChannelState draw_initial_state(const SystemConfig& cfg, Rng& rng) {
    ChannelState s;
    s.h1 = draw_h1(cfg, rng);
    s.h2 = draw_h2(cfg, rng);
    s.t = 0;
    return s;
}

ChannelState ar_step(const ChannelState& state, const SystemConfig& cfg, Rng& rng) {
    if (state.h1.rows() != static_cast<std::size_t>(cfg.n_ris) ||
        state.h1.cols() != static_cast<std::size_t>(cfg.m_antennas) ||
        state.h2.rows() != static_cast<std::size_t>(cfg.k_users) ||
        state.h2.cols() != static_cast<std::size_t>(cfg.n_ris))
        throw std::invalid_argument("ar_step: state dimensions inconsistent with config");

    const double rho = cfg.rho;
    const double mix = std::sqrt(1.0 - rho * rho);
    const CMatrix m1 = h1_mean(cfg);

    ChannelState next;
    next.t = state.t + 1;

    const CMatrix h1_new = draw_h1(cfg, rng);
    next.h1 = CMatrix(state.h1.rows(), state.h1.cols());
    for (std::size_t i = 0; i < next.h1.size(); ++i) {
        const cdouble mean = m1.data()[i];
        next.h1.data()[i] =
            mean + rho * (state.h1.data()[i] - mean) + mix * (h1_new.data()[i] - mean);
    }

    const CMatrix h2_new = draw_h2(cfg, rng);
    next.h2 = CMatrix(state.h2.rows(), state.h2.cols());
    for (std::size_t i = 0; i < next.h2.size(); ++i)
        next.h2.data()[i] = rho * state.h2.data()[i] + mix * h2_new.data()[i];

    return next;
}

}  // namespace risfarm
