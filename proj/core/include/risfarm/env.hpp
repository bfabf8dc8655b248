#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "risfarm/channel.hpp"
#include "risfarm/link.hpp"

namespace risfarm {

/// Flattened MDP state: [Re vec(H1), Im vec(H1), Re vec(H2), Im vec(H2)],
/// column-major vec. Length 2*(N*M + K*N).
struct Observation {
    std::vector<double> values;
};

/// Flattened action: [Re vec(W), Im vec(W), Re phi, Im phi], column-major
/// vec for W. Length 2*(M*K + N).
struct ActionVector {
    std::vector<double> values;
};

/// One CSI trajectory source. Distinct ids get distinct RNG streams.
struct Task {
    int id = 0;
    std::uint64_t seed = 0;
    ChannelState initial;
    double rho = 0.95;
};

struct Transition {
    Observation s;
    ActionVector a;
    double r = 0.0;
    Observation s_next;
    int task_id = 0;
    long t = 0;
    // task-inference annotations, refreshed by the relabel phase
    int y = 0;
    std::vector<double> z;
    std::uint64_t annot_version = 0;
};

int observation_dim(const SystemConfig& cfg);
int action_dim(const SystemConfig& cfg);

Observation encode_state(const ChannelState& state, const SystemConfig& cfg,
                         bool normalize = false);

/// Splits, reshapes and projects: W through the power constraint, phases
/// through unit modulus. Throws on wrong length.
std::pair<Beamformer, PhaseShift> decode_action(const ActionVector& a, const SystemConfig& cfg);

/// Inverse of the observation encoding (test and tooling aid).
ChannelState decode_state(const Observation& obs, const SystemConfig& cfg);

/// Builds the action vector for an explicit design (used by the baselines).
ActionVector encode_action(const Beamformer& w, const PhaseShift& phase, const SystemConfig& cfg);

/// Maps raw policy outputs in (-1,1) onto the action ranges: beamformer
/// components scale by sqrt(p_max/(2MK)), phase components pass through.
ActionVector scale_policy_output(const std::vector<double>& u, const SystemConfig& cfg);
std::vector<double> unscale_action(const ActionVector& a, const SystemConfig& cfg);

/// Sum rate of the decoded design on the given channel state.
double env_reward(const ChannelState& state, const Beamformer& w, const PhaseShift& phase,
                  const SystemConfig& cfg);

struct EnvOptions {
    int episode_len = 100;
    bool normalize_obs = false;
};

struct StepInfo {
    LinkReport report;
    double max_phase_dev = 0.0;   // max | |phi_n| - 1 | after decode
    bool power_projected = false; // raw W exceeded p_max and was rescaled
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

/// MDP over a CSI trajectory: reward is computed on the state the action
/// observed, then the channel advances by one AR(1) step.
class RisEnv {
public:
    RisEnv(SystemConfig cfg, EnvOptions opt);

    Observation reset(const Task& task);
    StepResult step(const ActionVector& a);

    const ChannelState& channel() const { return state_; }
    const SystemConfig& config() const { return cfg_; }
    const EnvOptions& options() const { return opt_; }
    long t() const { return state_.t; }
    bool done() const { return steps_ >= opt_.episode_len; }

private:
    SystemConfig cfg_;
    EnvOptions opt_;
    ChannelState state_;
    Rng rng_;
    int steps_ = 0;
    bool active_ = false;
};

std::vector<Task> make_task_batch(std::uint64_t master_seed, int count, const SystemConfig& cfg);

/// Streams per-step episode rows to CSV:
/// task_id,t,reward,tx_power,sinr_1..K
class EpisodeLogger {
public:
    EpisodeLogger(const std::string& path, int k_users);
    ~EpisodeLogger();
    void append(int task_id, long t, double reward, const LinkReport& report);

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace risfarm
