#include "risfarm/env.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace risfarm {

namespace {

// Stream-id namespaces for task construction and in-episode evolution.
constexpr std::uint64_t kTaskSeedSpace = 0x7461736Bull;  // task batch
constexpr std::uint64_t kEnvStream = 0x656E76ull;        // AR innovations
constexpr std::uint64_t kInitStream = 0x696E6974ull;     // initial draw

void append_matrix_colmajor(const CMatrix& m, double scale_re_im, std::vector<double>& out_re,
                            std::vector<double>& out_im) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const cdouble z = m.at(i, j) * scale_re_im;
            out_re.push_back(z.real());
            out_im.push_back(z.imag());
        }
    }
}

}  // namespace

int observation_dim(const SystemConfig& cfg) {
    return 2 * (cfg.n_ris * cfg.m_antennas + cfg.k_users * cfg.n_ris);
}

int action_dim(const SystemConfig& cfg) {
    return 2 * (cfg.m_antennas * cfg.k_users + cfg.n_ris);
}

Observation encode_state(const ChannelState& state, const SystemConfig& cfg, bool normalize) {
    Observation obs;
    obs.values.reserve(observation_dim(cfg));

    std::vector<double> re, im;
    re.reserve(state.h1.size());
    im.reserve(state.h1.size());
    const double s1 = normalize ? 1.0 / bs_ris_amplitude(cfg) : 1.0;
    append_matrix_colmajor(state.h1, s1, re, im);
    obs.values.insert(obs.values.end(), re.begin(), re.end());
    obs.values.insert(obs.values.end(), im.begin(), im.end());

    re.clear();
    im.clear();
    if (normalize) {
        const std::vector<double> amps = ris_user_amplitudes(cfg);
        CMatrix h2 = state.h2;
        for (int k = 0; k < cfg.k_users; ++k)
            for (int n = 0; n < cfg.n_ris; ++n) h2.at(k, n) /= amps[k];
        append_matrix_colmajor(h2, 1.0, re, im);
    } else {
        append_matrix_colmajor(state.h2, 1.0, re, im);
    }
    obs.values.insert(obs.values.end(), re.begin(), re.end());
    obs.values.insert(obs.values.end(), im.begin(), im.end());
    return obs;
}

ChannelState decode_state(const Observation& obs, const SystemConfig& cfg) {
    if (obs.values.size() != static_cast<std::size_t>(observation_dim(cfg)))
        throw std::invalid_argument("decode_state: wrong observation length");
    const int n = cfg.n_ris, m = cfg.m_antennas, k = cfg.k_users;
    ChannelState st;
    st.h1 = CMatrix(n, m);
    st.h2 = CMatrix(k, n);
    std::size_t off = 0;
    const std::size_t nm = static_cast<std::size_t>(n) * m;
    for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j)
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
            const std::size_t idx = j * n + i;
            st.h1.at(i, j) = cdouble(obs.values[off + idx], obs.values[off + nm + idx]);
        }
    off += 2 * nm;
    const std::size_t kn = static_cast<std::size_t>(k) * n;
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j)
        for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
            const std::size_t idx = j * k + i;
            st.h2.at(i, j) = cdouble(obs.values[off + idx], obs.values[off + kn + idx]);
        }
    return st;
}

std::pair<Beamformer, PhaseShift> decode_action(const ActionVector& a, const SystemConfig& cfg) {
    const int m = cfg.m_antennas, k = cfg.k_users, n = cfg.n_ris;
    const std::size_t mk = static_cast<std::size_t>(m) * k;
    if (a.values.size() != static_cast<std::size_t>(action_dim(cfg)))
        throw std::invalid_argument("decode_action: wrong action length");

    CMatrix w_raw(m, k);
    for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j)
        for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
            const std::size_t idx = j * m + i;
            w_raw.at(i, j) = cdouble(a.values[idx], a.values[mk + idx]);
        }

    std::vector<cdouble> phi_raw(n);
    const std::size_t off = 2 * mk;
    for (int i = 0; i < n; ++i)
        phi_raw[i] = cdouble(a.values[off + i], a.values[off + n + i]);

    return {project_power(w_raw, cfg.p_max), project_unit_modulus(phi_raw)};
}

ActionVector encode_action(const Beamformer& w, const PhaseShift& phase,
                           const SystemConfig& cfg) {
    const int m = cfg.m_antennas, k = cfg.k_users, n = cfg.n_ris;
    if (w.w.rows() != static_cast<std::size_t>(m) || w.w.cols() != static_cast<std::size_t>(k))
        throw std::invalid_argument("encode_action: beamformer shape mismatch");
    if (phase.theta.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("encode_action: phase length mismatch");

    ActionVector a;
    a.values.resize(action_dim(cfg));
    const std::size_t mk = static_cast<std::size_t>(m) * k;
    for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j)
        for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
            const std::size_t idx = j * m + i;
            a.values[idx] = w.w.at(i, j).real();
            a.values[mk + idx] = w.w.at(i, j).imag();
        }
    const std::vector<cdouble> phi = phase.phasors();
    const std::size_t off = 2 * mk;
    for (int i = 0; i < n; ++i) {
        a.values[off + i] = phi[i].real();
        a.values[off + n + i] = phi[i].imag();
    }
    return a;
}

ActionVector scale_policy_output(const std::vector<double>& u, const SystemConfig& cfg) {
    if (u.size() != static_cast<std::size_t>(action_dim(cfg)))
        throw std::invalid_argument("scale_policy_output: wrong length");
    const std::size_t mk2 = 2 * static_cast<std::size_t>(cfg.m_antennas) * cfg.k_users;
    const double w_scale = std::sqrt(cfg.p_max / static_cast<double>(mk2));
    ActionVector a;
    a.values = u;
    for (std::size_t i = 0; i < mk2; ++i) a.values[i] *= w_scale;
    return a;
}

std::vector<double> unscale_action(const ActionVector& a, const SystemConfig& cfg) {
    if (a.values.size() != static_cast<std::size_t>(action_dim(cfg)))
        throw std::invalid_argument("unscale_action: wrong length");
    const std::size_t mk2 = 2 * static_cast<std::size_t>(cfg.m_antennas) * cfg.k_users;
    const double w_scale = std::sqrt(cfg.p_max / static_cast<double>(mk2));
    std::vector<double> u = a.values;
    for (std::size_t i = 0; i < mk2; ++i) u[i] /= w_scale;
    return u;
}

double env_reward(const ChannelState& state, const Beamformer& w, const PhaseShift& phase,
                  const SystemConfig& cfg) {
    return evaluate_link(state, w, phase, cfg.noise_power_w()).sum_rate;
}

RisEnv::RisEnv(SystemConfig cfg, EnvOptions opt)
    : cfg_(std::move(cfg)), opt_(opt), rng_(0) {
    cfg_.validate();
    if (opt_.episode_len < 1) throw std::invalid_argument("RisEnv: episode_len must be >= 1");
}

Observation RisEnv::reset(const Task& task) {
    if (task.initial.h1.rows() != static_cast<std::size_t>(cfg_.n_ris) ||
        task.initial.h2.rows() != static_cast<std::size_t>(cfg_.k_users))
        throw std::invalid_argument("RisEnv::reset: task state does not match config");
    cfg_.rho = task.rho;
    state_ = task.initial;
    rng_ = Rng::stream(task.seed, kEnvStream);
    steps_ = 0;
    active_ = true;
    return encode_state(state_, cfg_, opt_.normalize_obs);
}

StepResult RisEnv::step(const ActionVector& a) {
    if (!active_) throw std::logic_error("RisEnv::step: reset required");
    if (done()) throw std::logic_error("RisEnv::step: episode finished");

    auto [w, phase] = decode_action(a, cfg_);

    StepResult res;
    res.info.report = evaluate_link(state_, w, phase, cfg_.noise_power_w());
    res.reward = res.info.report.sum_rate;

    double max_dev = 0.0;
    for (const cdouble& p : phase.phasors())
        max_dev = std::max(max_dev, std::abs(std::abs(p) - 1.0));
    res.info.max_phase_dev = max_dev;

    const std::size_t mk2 = 2 * static_cast<std::size_t>(cfg_.m_antennas) * cfg_.k_users;
    double raw_power = 0.0;
    for (std::size_t i = 0; i < mk2; ++i) raw_power += a.values[i] * a.values[i];
    res.info.power_projected = raw_power > cfg_.p_max + 1e-12;

    state_ = ar_step(state_, cfg_, rng_);
    ++steps_;
    res.done = done();
    res.obs = encode_state(state_, cfg_, opt_.normalize_obs);
    return res;
}

std::vector<Task> make_task_batch(std::uint64_t master_seed, int count, const SystemConfig& cfg) {
    if (count < 0) throw std::invalid_argument("make_task_batch: negative count");
    std::vector<Task> tasks;
    tasks.reserve(count);
    for (int i = 0; i < count; ++i) {
        Task t;
        t.id = i;
        t.seed = derive_seed(master_seed, kTaskSeedSpace, static_cast<std::uint64_t>(i));
        Rng init = Rng::stream(t.seed, kInitStream);
        t.initial = draw_initial_state(cfg, init);
        t.rho = cfg.rho;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

struct EpisodeLogger::Impl {
    std::ofstream out;
    int k_users;
};

EpisodeLogger::EpisodeLogger(const std::string& path, int k_users)
    : impl_(new Impl{std::ofstream(path), k_users}) {
    if (!impl_->out) throw std::runtime_error("EpisodeLogger: cannot open " + path);
    impl_->out << "task_id,t,reward,tx_power";
    for (int k = 1; k <= k_users; ++k) impl_->out << ",sinr_" << k;
    impl_->out << "\n";
}

EpisodeLogger::~EpisodeLogger() { delete impl_; }

void EpisodeLogger::append(int task_id, long t, double reward, const LinkReport& report) {
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        impl_->out << ',' << buf;
    };
    impl_->out << task_id << ',' << t;
    put(reward);
    put(report.tx_power);
    for (int k = 0; k < impl_->k_users; ++k)
        put(k < static_cast<int>(report.sinr.size()) ? report.sinr[k] : 0.0);
    impl_->out << "\n";
}

}  // namespace risfarm
