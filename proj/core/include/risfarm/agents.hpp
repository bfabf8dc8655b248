#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "risfarm/env.hpp"
#include "risfarm/neural.hpp"

namespace risfarm {

/// Training hit a non-finite loss; message carries epoch diagnostics.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ring buffer of transitions with a per-task index so task contexts can be
/// sampled as recency windows.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void add(Transition t);
    std::size_t size() const { return ring_.size(); }
    std::size_t capacity() const { return capacity_; }

    const Transition& at(std::size_t slot) const { return ring_[slot]; }
    Transition& at_mut(std::size_t slot) { return ring_[slot]; }

    /// Uniform sample of `batch` distinct slots. Throws when batch exceeds
    /// the population. `window` restricts to the most recent `window`
    /// insertions (0 means the whole buffer).
    std::vector<std::size_t> sample_slots(std::size_t batch, Rng& rng,
                                          std::size_t window = 0) const;

    /// Most recent `len` transitions of one task, oldest first. Throws when
    /// the task has no stored transitions.
    std::vector<const Transition*> context(int task_id, std::size_t len) const;

    /// Slot indices of the most recent `window` insertions (0 = all),
    /// oldest first.
    std::vector<std::size_t> recent_slots(std::size_t window = 0) const;

    /// Most recent `len`-long windows of one task stepping back by `stride`,
    /// newest window first; at most `max_windows` entries.
    std::vector<std::vector<const Transition*>> task_windows(int task_id, std::size_t len,
                                                             std::size_t stride,
                                                             std::size_t max_windows) const;

    const std::vector<int>& task_ids() const { return known_tasks_; }

private:
    std::size_t capacity_;
    std::vector<Transition> ring_;
    std::size_t next_ = 0;           // slot that the next add overwrites
    std::uint64_t inserted_ = 0;     // total insertions ever
    std::unordered_map<int, std::deque<std::size_t>> by_task_;
    std::vector<int> known_tasks_;
};

/// Discrete mixture component and continuous latent describing a task.
struct TaskEncoding {
    int y = 1;  // 1-based component index
    std::vector<double> z;
};

enum class EncodeMode { sample, evaluate };

struct EncoderSizes {
    int input_dim = 0;   // per-transition feature width: 2S + A + 1
    std::vector<int> embed_hidden{64};
    int embed_dim = 64;
    std::vector<int> trunk_hidden{};
    int trunk_out = 64;
    int components = 8;  // J
    int latent_dim = 8;  // L
};

/// Set encoder q(y | c), q(z | c, y): per-transition embeddings are
/// mean-pooled (order invariant), a trunk feeds a categorical head over J
/// components and per-component Gaussian heads.
class TaskEncoder {
public:
    TaskEncoder() = default;
    explicit TaskEncoder(const EncoderSizes& sizes);

    void init(Rng& rng);

    struct Forward {
        nn::RMatrix q;        // B x J, rows sum to 1
        nn::RMatrix logits;   // B x J
        nn::RMatrix means;    // B x (J*L)
        nn::RMatrix logvars;  // B x (J*L)
        std::vector<std::size_t> context_lens;
    };

    Forward encode(const std::vector<std::vector<const Transition*>>& contexts);

    /// Backward through the last encode. Upstream shapes match Forward.
    void backward(const nn::RMatrix& dlogits, const nn::RMatrix& dmeans,
                  const nn::RMatrix& dlogvars);

    /// Single-context inference. sample mode draws y from the categorical
    /// and z by reparameterization; evaluate mode is argmax / mean and
    /// consumes no randomness. Throws on an empty context.
    TaskEncoding infer(const std::vector<const Transition*>& context, EncodeMode mode, Rng* rng);

    const EncoderSizes& sizes() const { return sizes_; }
    std::vector<nn::ParamTensor*> params();
    void zero_grad();
    std::uint64_t version() const { return version_; }
    void bump_version() { ++version_; }

    std::string to_json() const;
    static TaskEncoder from_json(const std::string& text);

    static std::vector<double> transition_features(const Transition& t);

private:
    EncoderSizes sizes_;
    nn::Mlp embed_, trunk_;
    nn::Linear y_head_, mean_head_, logvar_head_;
    std::vector<std::size_t> last_lens_;  // tape for backward's pooling split
    std::uint64_t version_ = 0;
    bool have_forward_ = false;
};

struct DecoderSizes {
    int obs_dim = 0;
    int act_dim = 0;
    int latent_dim = 0;
    std::vector<int> hidden{128};
    int trunk_out = 128;
};

/// p(s_{t+1}, r_t | s_t, a_t, z): shared trunk with deterministic state and
/// reward mean heads, trained with squared error.
class TaskDecoder {
public:
    TaskDecoder() = default;
    explicit TaskDecoder(const DecoderSizes& sizes);

    void init(Rng& rng);

    std::pair<nn::RMatrix, nn::RMatrix> forward(const nn::RMatrix& x);  // (B x S, B x 1)
    nn::RMatrix backward(const nn::RMatrix& dstate, const nn::RMatrix& dreward,
                         bool accumulate = true);

    const DecoderSizes& sizes() const { return sizes_; }
    std::vector<nn::ParamTensor*> params();
    void zero_grad();

    std::string to_json() const;
    static TaskDecoder from_json(const std::string& text);

private:
    DecoderSizes sizes_;
    nn::Mlp trunk_;
    nn::Linear state_head_, reward_head_;
};

/// Mean squared reconstruction loss of the decoder on a batch, given
/// per-sample latents.
double decoder_loss(TaskDecoder& dec, const std::vector<const Transition*>& batch,
                    const std::vector<std::vector<double>>& z);

struct ElboTerms {
    double elbo = 0.0;
    double decoder_loss = 0.0;  // posterior-weighted
    double kl_z = 0.0;          // posterior-weighted
    double kl_y = 0.0;
};

struct ElboBatch {
    std::vector<const Transition*> targets;
    std::vector<std::vector<const Transition*>> contexts;  // one per target
};

/// Mixture ELBO of the task-inference model. When `fixed_noise` is given it
/// supplies the reparameterization draws (B x J*L, used by gradient checks);
/// otherwise they come from `rng`. Gradients are accumulated into encoder
/// and decoder parameters when `accumulate` is set.
ElboTerms elbo_loss(TaskEncoder& enc, TaskDecoder& dec, const ElboBatch& batch, double alpha_kl,
                    double beta_kl, const nn::RMatrix* fixed_noise, Rng* rng, bool accumulate);

/// Stored task encodings with nearest-neighbor lookup (ties resolved by
/// insertion order).
class TaskMap {
public:
    struct Entry {
        std::string label;
        std::vector<double> z;
    };

    void store(std::string label, std::vector<double> z);
    const Entry& lookup(const std::vector<double>& z_query) const;
    std::vector<double> centroid() const;
    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }

    std::string to_json() const;
    static TaskMap from_json(const std::string& text);

private:
    std::vector<Entry> entries_;
};

struct SacConfig {
    int obs_dim = 0;
    int cond_dim = 0;  // latent width appended to observations
    int act_dim = 0;
    std::vector<int> policy_hidden{256, 256};
    std::vector<int> q_hidden{256, 256};
    double lr = 3e-4;
    double gamma = 0.99;
    double tau_polyak = 0.005;
    double reward_scale = 1.0;
    double init_log_alpha = -2.3025850929940455;  // alpha = 0.1
    double target_entropy = 0.0;                  // 0 means use -act_dim
};

struct SacUpdateStats {
    double q1_loss = 0.0, q2_loss = 0.0;
    double policy_loss = 0.0;
    double alpha = 0.0;
    double mean_entropy = 0.0;
};

struct SacBatch {
    nn::RMatrix obs;        // B x obs_dim
    nn::RMatrix cond;       // B x cond_dim (0 columns allowed)
    nn::RMatrix act;        // B x act_dim, tanh-squashed policy actions
    std::vector<double> reward;
    nn::RMatrix obs_next;
    nn::RMatrix cond_next;
    std::vector<std::uint8_t> terminal;
};

/// Twin-critic soft actor-critic with target networks and learned
/// temperature. Conditioning input (cond_dim) is treated as a constant
/// feature; no gradients flow back into its producer.
class SacCore {
public:
    SacCore() = default;
    explicit SacCore(const SacConfig& cfg);

    void init(Rng& rng);

    std::vector<double> act(const std::vector<double>& obs, const std::vector<double>& cond,
                            bool deterministic, Rng* rng);

    /// Soft targets y = r_scaled + gamma * (min Q_target(s', a') - alpha log pi).
    std::vector<double> compute_targets(const SacBatch& batch, Rng& rng);

    SacUpdateStats update(const SacBatch& batch, Rng& rng);

    double alpha() const;
    const SacConfig& config() const { return cfg_; }
    std::vector<nn::ParamTensor*> params();
    nn::Mlp& policy() { return policy_; }

    std::string to_json() const;
    static SacCore from_json(const std::string& text);

private:
    SacConfig cfg_;
    nn::Mlp policy_, q1_, q2_, q1t_, q2t_;
    nn::ParamTensor log_alpha_;
    nn::AdamState opt_policy_, opt_q1_, opt_q2_, opt_alpha_;
};

struct DdpgConfig {
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<int> actor_hidden{256, 256};
    std::vector<int> critic_hidden{256, 256};
    double lr = 3e-4;
    double actor_lr = 0.0;  // 0: use lr for the actor too
    double gamma = 0.99;
    double tau_polyak = 0.005;
    double reward_scale = 1.0;
    double sigma_expl = 0.1;  // Gaussian exploration noise
};

struct DdpgUpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
};

struct DdpgBatch {
    nn::RMatrix obs;
    nn::RMatrix act;  // tanh-squashed actions
    std::vector<double> reward;
    nn::RMatrix obs_next;
    std::vector<std::uint8_t> terminal;
};

/// Deterministic actor-critic benchmark: single critic, target networks,
/// Gaussian exploration.
class DdpgCore {
public:
    DdpgCore() = default;
    explicit DdpgCore(const DdpgConfig& cfg);

    void init(Rng& rng);

    std::vector<double> act(const std::vector<double>& obs, double noise_sigma, Rng* rng);
    std::vector<double> compute_targets(const DdpgBatch& batch);
    DdpgUpdateStats update(const DdpgBatch& batch);

    const DdpgConfig& config() const { return cfg_; }
    std::vector<nn::ParamTensor*> params();

    std::string to_json() const;
    static DdpgCore from_json(const std::string& text);

private:
    DdpgConfig cfg_;
    nn::Mlp actor_, critic_, actor_t_, critic_t_;
    nn::AdamState opt_actor_, opt_critic_;
};

struct FarmConfig {
    // task-inference model
    int components = 8;      // J
    int latent_dim = 8;      // L
    int context_len = 32;
    int min_context = 1;
    double alpha_kl = 0.1;
    double beta_kl = 0.1;
    std::vector<int> embed_hidden{64};
    int embed_dim = 64;
    std::vector<int> trunk_hidden{};
    int trunk_out = 64;
    std::vector<int> decoder_hidden{128};
    int decoder_trunk_out = 128;

    // policy / critics
    std::vector<int> policy_hidden{256, 256};
    std::vector<int> q_hidden{256, 256};
    double lr = 3e-4;
    double gamma = 0.99;
    double tau_polyak = 0.005;
    double reward_scale = 1.0;
    double init_log_alpha = -2.3025850929940455;

    // schedule
    int iterations = 100;
    int episodes_per_task = 1;
    int elbo_updates = 10;
    int elbo_batch = 32;
    int sac_updates = 60;
    int sac_batch = 128;
    std::size_t buffer_capacity = 60000;
    long relabel_window = -1;  // -1: whole buffer
    int eval_tasks = 2;

    // task mapping
    bool mapping = true;
    double map_delta = std::numeric_limits<double>::infinity();
};

struct EpochMetrics {
    int epoch = 0;
    double elbo = 0.0, decoder_loss = 0.0, kl_z = 0.0, kl_y = 0.0;
    double policy_loss = 0.0, critic_loss = 0.0;
    double alpha = 0.0;
    double eval_return = 0.0;
};

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows);

/// Task-inference meta-agent: mixture encoder + reconstruction decoder
/// trained by ELBO ascent, a latent-conditioned SAC policy, and a task map
/// that snaps unseen test-time encodings to stored training encodings.
/// With components = 1 and latent_dim = 0 it degenerates to plain SAC.
class FarmAgent {
public:
    FarmAgent() = default;
    FarmAgent(const SystemConfig& sys, const EnvOptions& envopt, const FarmConfig& cfg,
              std::uint64_t seed);

    std::vector<EpochMetrics> train(const std::vector<Task>& tasks);

    /// Zero-shot action: evaluation-mode inference on the caller's recent
    /// context, optional task-map snap, deterministic policy mean.
    ActionVector farm_act(const std::vector<const Transition*>& context, const Observation& s);

    TaskEncoding encode_eval(const std::vector<const Transition*>& context);

    const FarmConfig& config() const { return cfg_; }
    void set_mapping(bool enabled) { cfg_.mapping = enabled; }
    const SystemConfig& system() const { return sys_; }
    const EnvOptions& env_options() const { return envopt_; }
    TaskMap& task_map() { return map_; }
    const TaskMap& task_map() const { return map_; }
    SacCore& sac() { return sac_; }
    TaskEncoder& encoder() { return enc_; }
    TaskDecoder& decoder() { return dec_; }

    /// FNV-1a over the bit patterns of every parameter value.
    std::uint64_t param_checksum();

    std::string to_json() const;
    static FarmAgent from_json(const std::string& text);

private:
    double evaluate_policy(const std::vector<Task>& tasks);
    void populate_task_map(const std::vector<Task>& tasks);

    SystemConfig sys_;
    EnvOptions envopt_;
    FarmConfig cfg_;
    std::uint64_t seed_ = 0;
    SacCore sac_;
    TaskEncoder enc_;
    TaskDecoder dec_;
    TaskMap map_;
    ReplayBuffer buf_{1};
};

struct DdpgTrainConfig {
    std::vector<int> actor_hidden{256, 256};
    std::vector<int> critic_hidden{256, 256};
    double lr = 3e-4;
    double gamma = 0.99;
    double tau_polyak = 0.005;
    double reward_scale = 1.0;
    double sigma_expl = 0.1;
    int iterations = 100;
    int episodes_per_task = 1;
    int updates = 60;
    int batch = 128;
    std::size_t buffer_capacity = 60000;
    int eval_tasks = 2;
};

/// DDPG benchmark on the same MDP, conditioned on the observation only.
class DdpgAgent {
public:
    DdpgAgent() = default;
    DdpgAgent(const SystemConfig& sys, const EnvOptions& envopt, const DdpgTrainConfig& cfg,
              std::uint64_t seed);

    std::vector<EpochMetrics> train(const std::vector<Task>& tasks);
    ActionVector act_eval(const Observation& s);

    const DdpgTrainConfig& config() const { return cfg_; }
    const SystemConfig& system() const { return sys_; }
    const EnvOptions& env_options() const { return envopt_; }
    DdpgCore& core() { return core_; }

    std::string to_json() const;
    static DdpgAgent from_json(const std::string& text);

private:
    double evaluate_policy(const std::vector<Task>& tasks);

    SystemConfig sys_;
    EnvOptions envopt_;
    DdpgTrainConfig cfg_;
    std::uint64_t seed_ = 0;
    DdpgCore core_;
    ReplayBuffer buf_{1};
};

}  // namespace risfarm
