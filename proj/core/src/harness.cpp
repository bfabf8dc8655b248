#include "risfarm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace risfarm {

namespace {

constexpr std::uint64_t kEvalNamespace = 0x4556414Cull;   // eval task seeds
constexpr std::uint64_t kTrainNamespace = 0x5452414Eull;  // training task seeds
constexpr std::uint64_t kAgentNamespace = 0x41474E54ull;  // agent init seeds
constexpr std::uint64_t kZfrStream = 0x5A4652ull;         // per-realization ZFR phases
constexpr std::uint64_t kSfpStream = 0x534650ull;         // per-step SFP init
constexpr std::uint64_t kAngleStream = 0x414E47ull;       // scenario angles

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string sweep_tag(const ExperimentSpec& spec, std::size_t vi) {
    if (spec.sweep_variable == "n_ris") {
        std::ostringstream os;
        os << "_n" << static_cast<int>(spec.sweep_values[vi]);
        return os.str();
    }
    return "";  // one checkpoint serves every rho
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::ZFR: return "ZFR";
        case Method::SFP: return "SFP";
        case Method::DDPG: return "DDPG";
        case Method::SAC: return "SAC";
        case Method::FARM: return "FARM";
        case Method::FARM_nomap: return "FARM_nomap";
    }
    throw std::logic_error("to_string(Method): bad value");
}

Method method_from_string(const std::string& s) {
    if (s == "ZFR") return Method::ZFR;
    if (s == "SFP") return Method::SFP;
    if (s == "DDPG") return Method::DDPG;
    if (s == "SAC") return Method::SAC;
    if (s == "FARM") return Method::FARM;
    if (s == "FARM_nomap") return Method::FARM_nomap;
    throw std::invalid_argument("unknown method: " + s);
}

void ExperimentSpec::validate() const {
    config.validate();
    if (name.empty()) throw std::invalid_argument("ExperimentSpec: empty name");
    if (sweep_variable != "n_ris" && sweep_variable != "rho")
        throw std::invalid_argument("ExperimentSpec: sweep_variable must be n_ris or rho");
    if (sweep_values.empty()) throw std::invalid_argument("ExperimentSpec: no sweep values");
    for (std::size_t i = 1; i < sweep_values.size(); ++i)
        if (!(sweep_values[i] > sweep_values[i - 1]))
            throw std::invalid_argument("ExperimentSpec: sweep values must be strictly ordered");
    if (methods.empty()) throw std::invalid_argument("ExperimentSpec: no methods");
    if (realizations < 1) throw std::invalid_argument("ExperimentSpec: realizations must be >= 1");
    if (episode_len < 1) throw std::invalid_argument("ExperimentSpec: episode_len must be >= 1");
    sfp.validate();
}

std::string ExperimentSpec::resolved_checkpoint_dir() const {
    return checkpoint_dir.empty() ? output_dir : checkpoint_dir;
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw std::invalid_argument(where + ": unknown field '" + key + "'");
}

TrainSettings train_settings_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "tasks", "iterations", "episodes_per_task", "elbo_updates", "elbo_batch",
        "sac_updates", "batch", "components", "latent_dim", "context_len",
        "policy_hidden", "q_hidden", "embed_hidden", "embed_dim", "decoder_hidden",
        "decoder_trunk_out", "lr", "gamma", "tau_polyak", "reward_scale", "alpha_kl",
        "beta_kl", "buffer_capacity", "sigma_expl"};
    reject_unknown(j, known, "TrainSettings");
    TrainSettings t;
    auto get = [&](const char* k, auto& dst) {
        if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
    };
    get("tasks", t.tasks);
    get("iterations", t.iterations);
    get("episodes_per_task", t.episodes_per_task);
    get("elbo_updates", t.elbo_updates);
    get("elbo_batch", t.elbo_batch);
    get("sac_updates", t.sac_updates);
    get("batch", t.batch);
    get("components", t.components);
    get("latent_dim", t.latent_dim);
    get("context_len", t.context_len);
    get("policy_hidden", t.policy_hidden);
    get("q_hidden", t.q_hidden);
    get("embed_hidden", t.embed_hidden);
    get("embed_dim", t.embed_dim);
    get("decoder_hidden", t.decoder_hidden);
    get("decoder_trunk_out", t.decoder_trunk_out);
    get("lr", t.lr);
    get("gamma", t.gamma);
    get("tau_polyak", t.tau_polyak);
    get("reward_scale", t.reward_scale);
    get("alpha_kl", t.alpha_kl);
    get("beta_kl", t.beta_kl);
    get("buffer_capacity", t.buffer_capacity);
    get("sigma_expl", t.sigma_expl);
    return t;
}

nlohmann::json train_settings_to_json(const TrainSettings& t) {
    nlohmann::json j;
    j["tasks"] = t.tasks;
    j["iterations"] = t.iterations;
    j["episodes_per_task"] = t.episodes_per_task;
    j["elbo_updates"] = t.elbo_updates;
    j["elbo_batch"] = t.elbo_batch;
    j["sac_updates"] = t.sac_updates;
    j["batch"] = t.batch;
    j["components"] = t.components;
    j["latent_dim"] = t.latent_dim;
    j["context_len"] = t.context_len;
    j["policy_hidden"] = t.policy_hidden;
    j["q_hidden"] = t.q_hidden;
    j["embed_hidden"] = t.embed_hidden;
    j["embed_dim"] = t.embed_dim;
    j["decoder_hidden"] = t.decoder_hidden;
    j["decoder_trunk_out"] = t.decoder_trunk_out;
    j["lr"] = t.lr;
    j["gamma"] = t.gamma;
    j["tau_polyak"] = t.tau_polyak;
    j["reward_scale"] = t.reward_scale;
    j["alpha_kl"] = t.alpha_kl;
    j["beta_kl"] = t.beta_kl;
    j["buffer_capacity"] = t.buffer_capacity;
    j["sigma_expl"] = t.sigma_expl;
    return j;
}

SfpSettings sfp_settings_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {"max_iters", "tol", "restarts", "grid",
                                                "golden_iters"};
    reject_unknown(j, known, "SfpSettings");
    SfpSettings s;
    if (j.contains("max_iters")) s.max_iters = j.at("max_iters").get<int>();
    if (j.contains("tol")) s.tol = j.at("tol").get<double>();
    if (j.contains("restarts")) s.restarts = j.at("restarts").get<int>();
    if (j.contains("grid")) s.grid = j.at("grid").get<int>();
    if (j.contains("golden_iters")) s.golden_iters = j.at("golden_iters").get<int>();
    return s;
}

}  // namespace

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    static const std::set<std::string> known = {
        "name", "config", "sweep_variable", "sweep_values", "methods", "realizations",
        "master_seed", "output_dir", "episode_len", "normalize_obs", "log_episodes",
        "checkpoint_dir", "train_inline", "train", "sfp"};
    reject_unknown(j, known, "ExperimentSpec");
    for (const char* req : {"name", "config", "sweep_variable", "sweep_values", "methods",
                            "realizations", "master_seed"})
        if (!j.contains(req))
            throw std::invalid_argument(std::string("ExperimentSpec: missing field '") + req +
                                        "'");

    ExperimentSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.config = parse_system_config(j.at("config").dump());
    spec.sweep_variable = j.at("sweep_variable").get<std::string>();
    spec.sweep_values = j.at("sweep_values").get<std::vector<double>>();
    for (const auto& m : j.at("methods"))
        spec.methods.push_back(method_from_string(m.get<std::string>()));
    spec.realizations = j.at("realizations").get<int>();
    spec.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("output_dir")) spec.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("episode_len")) spec.episode_len = j.at("episode_len").get<int>();
    if (j.contains("normalize_obs")) spec.normalize_obs = j.at("normalize_obs").get<bool>();
    if (j.contains("log_episodes")) spec.log_episodes = j.at("log_episodes").get<bool>();
    if (j.contains("checkpoint_dir"))
        spec.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
    if (j.contains("train_inline")) spec.train_inline = j.at("train_inline").get<bool>();
    if (j.contains("train")) spec.train = train_settings_from_json(j.at("train"));
    if (j.contains("sfp")) spec.sfp = sfp_settings_from_json(j.at("sfp"));
    spec.validate();
    return spec;
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["config"] = nlohmann::json::parse(system_config_to_json(spec.config));
    j["sweep_variable"] = spec.sweep_variable;
    j["sweep_values"] = spec.sweep_values;
    nlohmann::json ms = nlohmann::json::array();
    for (Method m : spec.methods) ms.push_back(to_string(m));
    j["methods"] = std::move(ms);
    j["realizations"] = spec.realizations;
    j["master_seed"] = spec.master_seed;
    j["output_dir"] = spec.output_dir;
    j["episode_len"] = spec.episode_len;
    j["normalize_obs"] = spec.normalize_obs;
    j["log_episodes"] = spec.log_episodes;
    j["checkpoint_dir"] = spec.checkpoint_dir;
    j["train_inline"] = spec.train_inline;
    j["train"] = train_settings_to_json(spec.train);
    nlohmann::json sfp;
    sfp["max_iters"] = spec.sfp.max_iters;
    sfp["tol"] = spec.sfp.tol;
    sfp["restarts"] = spec.sfp.restarts;
    sfp["grid"] = spec.sfp.grid;
    sfp["golden_iters"] = spec.sfp.golden_iters;
    j["sfp"] = std::move(sfp);
    return j.dump(2);
}

std::pair<int, int> choose_ris_factorization(int n) {
    if (n < 1) throw std::invalid_argument("choose_ris_factorization: n must be >= 1");
    const int root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    for (int d = root; d <= n; ++d)
        if (n % d == 0) return {d, n / d};
    return {n, 1};
}

SystemConfig apply_sweep(const SystemConfig& base, const std::string& variable, double value) {
    SystemConfig cfg = base;
    if (variable == "n_ris") {
        cfg.n_ris = static_cast<int>(value);
        const auto [nx, ny] = choose_ris_factorization(cfg.n_ris);
        cfg.n_x = nx;
        cfg.n_y = ny;
    } else if (variable == "rho") {
        cfg.rho = value;
    } else {
        throw std::invalid_argument("apply_sweep: unknown variable " + variable);
    }
    cfg.validate();
    return cfg;
}

namespace {

SystemConfig preset_base(std::uint64_t scenario_seed) {
    SystemConfig cfg;
    cfg.p_max = 10.0;
    cfg.noise_density = -174.0;
    cfg.bandwidth = 1.0e7;
    cfg.fc = 5.0e9;
    cfg.rician_k_db = 3.0;
    cfg.d_bs_ris = 50.0;
    cfg.z_r = 10.0;
    cfg.d_a = cfg.wavelength() / 2.0;
    cfg.d_c = cfg.d_a;
    Rng rng = Rng::stream(scenario_seed, kAngleStream);
    cfg.phi_a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    cfg.psi_a = rng.uniform(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
    cfg.phi_d = rng.uniform(0.0, 2.0 * std::numbers::pi);
    cfg.pathloss_mode = PathlossMode::tr36873;
    return cfg;
}

}  // namespace

SystemConfig make_desk_config(std::uint64_t scenario_seed) {
    SystemConfig cfg = preset_base(scenario_seed);
    cfg.m_antennas = 4;
    cfg.n_ris = 8;
    cfg.n_x = 4;
    cfg.n_y = 2;
    cfg.k_users = 2;
    cfg.rho = 0.8;
    cfg.d_ris_user = {20.0, 20.0};
    cfg.validate();
    return cfg;
}

SystemConfig make_table1_config(std::uint64_t scenario_seed) {
    SystemConfig cfg = preset_base(scenario_seed);
    cfg.m_antennas = 8;
    cfg.n_ris = 32;
    cfg.n_x = 8;
    cfg.n_y = 4;
    cfg.k_users = 4;
    cfg.rho = 0.95;
    cfg.d_ris_user = {20.0, 20.0, 20.0, 20.0};
    cfg.validate();
    return cfg;
}

ExperimentSpec desk_preset() {
    ExperimentSpec spec;
    spec.name = "desk";
    spec.config = make_desk_config(1);
    spec.sweep_variable = "n_ris";
    spec.sweep_values = {8, 16};
    spec.methods = {Method::ZFR, Method::SFP};
    spec.realizations = 20;
    spec.master_seed = 1;
    return spec;
}

ExperimentSpec table1_preset() {
    ExperimentSpec spec;
    spec.name = "table1_fig3";
    spec.config = make_table1_config(1);
    spec.sweep_variable = "n_ris";
    spec.sweep_values = {16, 32, 64};
    spec.methods = {Method::ZFR, Method::SFP};
    spec.realizations = 100;
    spec.master_seed = 1;
    return spec;
}

std::vector<Task> eval_tasks_for(const ExperimentSpec& spec, std::size_t value_index,
                                 const SystemConfig& cfg) {
    // rho sweeps share realization seeds across cells (common random
    // numbers): each realization keeps its initial draw and innovation
    // stream, so cells differ only through the evolution coefficient
    const std::size_t index = spec.sweep_variable == "rho" ? 0 : value_index;
    return make_task_batch(derive_seed(spec.master_seed, kEvalNamespace, index),
                           spec.realizations, cfg);
}

std::vector<Task> train_tasks_for(const ExperimentSpec& spec, std::size_t value_index,
                                  const SystemConfig& cfg) {
    return make_task_batch(derive_seed(spec.master_seed, kTrainNamespace, value_index),
                           spec.train.tasks, cfg);
}

std::string checkpoint_path(const ExperimentSpec& spec, Method m, std::size_t value_index) {
    const Method file_method = m == Method::FARM_nomap ? Method::FARM : m;
    std::string name = to_string(file_method);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return spec.resolved_checkpoint_dir() + "/checkpoint_" + name + sweep_tag(spec, value_index) +
           ".json";
}

namespace {

bool is_learned(Method m) { return m != Method::ZFR && m != Method::SFP; }

FarmConfig farm_config_for(const ExperimentSpec& spec, bool plain_sac) {
    FarmConfig c;
    const TrainSettings& t = spec.train;
    c.components = plain_sac ? 1 : t.components;
    c.latent_dim = plain_sac ? 0 : t.latent_dim;
    c.context_len = t.context_len;
    c.alpha_kl = t.alpha_kl;
    c.beta_kl = t.beta_kl;
    c.embed_hidden = t.embed_hidden;
    c.embed_dim = t.embed_dim;
    c.trunk_hidden = {};
    c.trunk_out = t.embed_dim;
    c.decoder_hidden = t.decoder_hidden;
    c.decoder_trunk_out = t.decoder_trunk_out;
    c.policy_hidden = t.policy_hidden;
    c.q_hidden = t.q_hidden;
    c.lr = t.lr;
    c.gamma = t.gamma;
    c.tau_polyak = t.tau_polyak;
    c.reward_scale = t.reward_scale;
    c.iterations = t.iterations;
    c.episodes_per_task = t.episodes_per_task;
    c.elbo_updates = plain_sac ? 0 : t.elbo_updates;
    c.elbo_batch = t.elbo_batch;
    c.sac_updates = t.sac_updates;
    c.sac_batch = t.batch;
    c.buffer_capacity = t.buffer_capacity;
    c.mapping = !plain_sac;
    return c;
}

DdpgTrainConfig ddpg_config_for(const ExperimentSpec& spec) {
    DdpgTrainConfig c;
    const TrainSettings& t = spec.train;
    c.actor_hidden = t.policy_hidden;
    c.critic_hidden = t.q_hidden;
    c.lr = t.lr;
    c.gamma = t.gamma;
    c.tau_polyak = t.tau_polyak;
    c.reward_scale = t.reward_scale;
    c.sigma_expl = t.sigma_expl;
    c.iterations = t.iterations;
    c.episodes_per_task = t.episodes_per_task;
    c.updates = t.sac_updates;
    c.batch = t.batch;
    c.buffer_capacity = t.buffer_capacity;
    return c;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

struct RealizationOutcome {
    double mean_sum_rate = 0.0;
    double decision_seconds = 0.0;
    long decisions = 0;
};

void audit_step(const StepResult& res, const SystemConfig& cfg, Method m) {
    if (res.info.max_phase_dev > 1e-12)
        throw std::runtime_error("constraint audit: unit-modulus violated by " + to_string(m));
    if (res.info.report.tx_power > cfg.p_max + 1e-9)
        throw std::runtime_error("constraint audit: power violated by " + to_string(m));
}

RealizationOutcome run_classical_episode(Method m, const ExperimentSpec& spec,
                                         const SystemConfig& cfg, const Task& task,
                                         EpisodeLogger* logger) {
    RisEnv env(cfg, EnvOptions{spec.episode_len, false});
    env.reset(task);
    Rng zfr_rng = Rng::stream(task.seed, kZfrStream);
    RealizationOutcome out;
    double total = 0.0;
    int steps = 0;
    while (!env.done()) {
        const ChannelState& ch = env.channel();
        Beamformer w;
        PhaseShift phase;
        const auto t0 = std::chrono::steady_clock::now();
        if (m == Method::ZFR) {
            // a rank-deficient draw is resampled with fresh phases
            for (int attempt = 0;; ++attempt) {
                try {
                    std::tie(w, phase) = zfr_policy(ch, zfr_rng, cfg);
                    break;
                } catch (const SingularMatrixError&) {
                    if (attempt >= 16) throw;
                }
            }
        } else {
            SfpSettings settings = spec.sfp;
            settings.seed = derive_seed(task.seed, kSfpStream, static_cast<std::uint64_t>(steps));
            const SfpResult sol = sfp_policy(ch, settings, cfg);
            w = sol.w;
            phase = sol.phase;
        }
        const auto t1 = std::chrono::steady_clock::now();
        out.decision_seconds += std::chrono::duration<double>(t1 - t0).count();
        ++out.decisions;

        const StepResult res = env.step(encode_action(w, phase, cfg));
        audit_step(res, cfg, m);
        if (logger) logger->append(task.id, env.t() - 1, res.reward, res.info.report);
        total += res.reward;
        ++steps;
    }
    out.mean_sum_rate = total / std::max(steps, 1);
    return out;
}

RealizationOutcome run_farm_episode(FarmAgent& agent, bool mapping, const ExperimentSpec& spec,
                                    const SystemConfig& cfg, const Task& task,
                                    EpisodeLogger* logger) {
    agent.set_mapping(mapping);  // evaluation-side toggle
    RisEnv env(cfg, EnvOptions{spec.episode_len, agent.env_options().normalize_obs});
    Observation obs = env.reset(task);
    std::deque<Transition> ctx;
    RealizationOutcome out;
    double total = 0.0;
    int steps = 0;
    while (!env.done()) {
        std::vector<const Transition*> ptrs;
        for (const auto& t : ctx) ptrs.push_back(&t);
        const auto t0 = std::chrono::steady_clock::now();
        const ActionVector a = agent.farm_act(ptrs, obs);
        const auto t1 = std::chrono::steady_clock::now();
        out.decision_seconds += std::chrono::duration<double>(t1 - t0).count();
        ++out.decisions;

        const StepResult res = env.step(a);
        audit_step(res, cfg, mapping ? Method::FARM : Method::FARM_nomap);
        if (logger) logger->append(task.id, env.t() - 1, res.reward, res.info.report);
        Transition tr;
        tr.s = obs;
        tr.a = a;
        tr.r = res.reward;
        tr.s_next = res.obs;
        tr.task_id = task.id;
        ctx.push_back(std::move(tr));
        while (ctx.size() > static_cast<std::size_t>(agent.config().context_len))
            ctx.pop_front();
        total += res.reward;
        ++steps;
        obs = res.obs;
    }
    out.mean_sum_rate = total / std::max(steps, 1);
    return out;
}

RealizationOutcome run_ddpg_episode(DdpgAgent& agent, const ExperimentSpec& spec,
                                    const SystemConfig& cfg, const Task& task,
                                    EpisodeLogger* logger) {
    RisEnv env(cfg, EnvOptions{spec.episode_len, agent.env_options().normalize_obs});
    Observation obs = env.reset(task);
    RealizationOutcome out;
    double total = 0.0;
    int steps = 0;
    while (!env.done()) {
        const auto t0 = std::chrono::steady_clock::now();
        const ActionVector a = agent.act_eval(obs);
        const auto t1 = std::chrono::steady_clock::now();
        out.decision_seconds += std::chrono::duration<double>(t1 - t0).count();
        ++out.decisions;
        const StepResult res = env.step(a);
        audit_step(res, cfg, Method::DDPG);
        if (logger) logger->append(task.id, env.t() - 1, res.reward, res.info.report);
        total += res.reward;
        ++steps;
        obs = res.obs;
    }
    out.mean_sum_rate = total / std::max(steps, 1);
    return out;
}

}  // namespace

std::vector<ResultRow> run_sweep(const ExperimentSpec& spec, int threads) {
    spec.validate();
    std::filesystem::create_directories(spec.output_dir);
    if (threads < 1) threads = 1;

    std::vector<ResultRow> rows;
    for (std::size_t vi = 0; vi < spec.sweep_values.size(); ++vi) {
        const double value = spec.sweep_values[vi];
        const SystemConfig cfg = apply_sweep(spec.config, spec.sweep_variable, value);
        const std::vector<Task> tasks = eval_tasks_for(spec, vi, cfg);

        for (Method m : spec.methods) {
            // learned agents restore once per cell, copies act as snapshots
            std::unique_ptr<FarmAgent> farm;
            std::unique_ptr<DdpgAgent> ddpg;
            if (is_learned(m)) {
                const std::string path = checkpoint_path(spec, m, vi);
                if (!std::filesystem::exists(path))
                    throw std::runtime_error("missing checkpoint for method " + to_string(m) +
                                             ": " + path);
                if (m == Method::DDPG)
                    ddpg = std::make_unique<DdpgAgent>(DdpgAgent::from_json(read_file(path)));
                else
                    farm = std::make_unique<FarmAgent>(FarmAgent::from_json(read_file(path)));
                const SystemConfig& asys = m == Method::DDPG ? ddpg->system() : farm->system();
                if (observation_dim(asys) != observation_dim(cfg) ||
                    action_dim(asys) != action_dim(cfg))
                    throw std::runtime_error("checkpoint for " + to_string(m) +
                                             " does not match the sweep configuration");
            }

            std::unique_ptr<EpisodeLogger> logger;
            if (spec.log_episodes) {
                std::ostringstream os;
                os << spec.output_dir << "/episodes_" << to_string(m) << "_" << spec.sweep_variable
                   << "=" << format_double(value) << ".csv";
                logger = std::make_unique<EpisodeLogger>(os.str(), cfg.k_users);
            }

            std::vector<RealizationOutcome> outcomes(tasks.size());
            auto run_one = [&](std::size_t r, FarmAgent* fa, DdpgAgent* da) {
                if (m == Method::ZFR || m == Method::SFP)
                    outcomes[r] = run_classical_episode(m, spec, cfg, tasks[r],
                                                        logger ? logger.get() : nullptr);
                else if (m == Method::DDPG)
                    outcomes[r] = run_ddpg_episode(*da, spec, cfg, tasks[r],
                                                   logger ? logger.get() : nullptr);
                else
                    outcomes[r] = run_farm_episode(*fa, m == Method::FARM, spec, cfg, tasks[r],
                                                   logger ? logger.get() : nullptr);
            };

            if (threads == 1 || logger) {
                for (std::size_t r = 0; r < tasks.size(); ++r)
                    run_one(r, farm.get(), ddpg.get());
            } else {
                std::vector<std::thread> pool;
                std::atomic<std::size_t> next{0};
                for (int t = 0; t < threads; ++t) {
                    pool.emplace_back([&, t]() {
                        // thread-local agent copies: forward passes mutate caches
                        std::unique_ptr<FarmAgent> lf =
                            farm ? std::make_unique<FarmAgent>(*farm) : nullptr;
                        std::unique_ptr<DdpgAgent> ld =
                            ddpg ? std::make_unique<DdpgAgent>(*ddpg) : nullptr;
                        for (std::size_t r = next.fetch_add(1); r < tasks.size();
                             r = next.fetch_add(1))
                            run_one(r, lf.get(), ld.get());
                    });
                }
                for (auto& th : pool) th.join();
            }

            ResultRow row;
            row.method = m;
            row.sweep_value = value;
            row.realizations = static_cast<int>(outcomes.size());
            double sum = 0.0;
            for (const auto& o : outcomes) sum += o.mean_sum_rate;
            row.mean_sum_rate = sum / outcomes.size();
            double var = 0.0;
            for (const auto& o : outcomes) {
                const double d = o.mean_sum_rate - row.mean_sum_rate;
                var += d * d;
            }
            row.std_sum_rate = outcomes.size() > 1
                                   ? std::sqrt(var / (outcomes.size() - 1))
                                   : 0.0;
            double dec_s = 0.0;
            long decs = 0;
            for (const auto& o : outcomes) {
                dec_s += o.decision_seconds;
                decs += o.decisions;
            }
            row.ms_per_decision = decs > 0 ? 1000.0 * dec_s / decs : 0.0;
            rows.push_back(row);
        }
    }

    write_results_csv(spec.output_dir + "/results_" + spec.name + ".csv", rows);
    write_timing_csv(spec.output_dir + "/timing_" + spec.name + ".csv", rows);
    return rows;
}

void train_agents(const ExperimentSpec& spec) {
    spec.validate();
    std::filesystem::create_directories(spec.resolved_checkpoint_dir());
    std::filesystem::create_directories(spec.output_dir);

    std::vector<Method> learned;
    for (Method m : spec.methods) {
        Method canonical = m == Method::FARM_nomap ? Method::FARM : m;
        if (is_learned(canonical) &&
            std::find(learned.begin(), learned.end(), canonical) == learned.end())
            learned.push_back(canonical);
    }
    if (learned.empty()) return;

    // one checkpoint per sweep value when the sweep changes tensor shapes
    std::vector<std::size_t> variants;
    if (spec.sweep_variable == "n_ris")
        for (std::size_t vi = 0; vi < spec.sweep_values.size(); ++vi) variants.push_back(vi);
    else
        variants.push_back(0);

    for (std::size_t vi : variants) {
        const SystemConfig cfg =
            spec.sweep_variable == "n_ris"
                ? apply_sweep(spec.config, spec.sweep_variable, spec.sweep_values[vi])
                : spec.config;
        const std::vector<Task> tasks = train_tasks_for(spec, vi, cfg);

        // the held-out evaluation streams must never appear in training
        {
            std::set<std::uint64_t> train_seeds;
            for (const auto& t : tasks) train_seeds.insert(t.seed);
            for (std::size_t evi = 0; evi < spec.sweep_values.size(); ++evi)
                for (const auto& t : eval_tasks_for(spec, evi, cfg))
                    if (train_seeds.count(t.seed))
                        throw std::logic_error("train/eval task seed namespaces overlap");
        }

        const EnvOptions envopt{spec.episode_len, spec.normalize_obs};
        for (std::size_t mi = 0; mi < learned.size(); ++mi) {
            const Method m = learned[mi];
            const std::uint64_t agent_seed =
                derive_seed(spec.master_seed, kAgentNamespace, mi * 1000 + vi);
            const std::string ck_path = checkpoint_path(spec, m, vi);
            const std::string metrics_path = spec.output_dir + "/metrics_" +
                                             [&] {
                                                 std::string n = to_string(m);
                                                 std::transform(n.begin(), n.end(), n.begin(),
                                                                [](unsigned char c) {
                                                                    return static_cast<char>(
                                                                        std::tolower(c));
                                                                });
                                                 return n;
                                             }() +
                                             sweep_tag(spec, vi) + ".csv";

            if (m == Method::DDPG) {
                DdpgAgent agent(cfg, envopt, ddpg_config_for(spec), agent_seed);
                const auto metrics = agent.train(tasks);
                write_metrics_csv(metrics_path, metrics);
                write_file(ck_path, agent.to_json());
            } else {
                const bool plain = m == Method::SAC;
                FarmAgent agent(cfg, envopt, farm_config_for(spec, plain), agent_seed);
                const auto metrics = agent.train(tasks);
                write_metrics_csv(metrics_path, metrics);
                write_file(ck_path, agent.to_json());
            }
        }
    }
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sweep_value,method,mean_sum_rate,std_sum_rate,realizations\n";
    for (const auto& r : rows)
        out << format_double(r.sweep_value) << ',' << to_string(r.method) << ','
            << format_double(r.mean_sum_rate) << ',' << format_double(r.std_sum_rate) << ','
            << r.realizations << "\n";
}

void write_timing_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sweep_value,method,ms_per_decision\n";
    for (const auto& r : rows)
        out << format_double(r.sweep_value) << ',' << to_string(r.method) << ','
            << format_double(r.ms_per_decision) << "\n";
}

void write_report_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sweep_value,method,mean,std,n\n";
    for (const auto& r : rows)
        out << format_double(r.sweep_value) << ',' << to_string(r.method) << ','
            << format_double(r.mean_sum_rate) << ',' << format_double(r.std_sum_rate) << ','
            << r.realizations << "\n";
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty results file " + path);
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        ResultRow r;
        std::getline(ss, field, ',');
        r.sweep_value = std::stod(field);
        std::getline(ss, field, ',');
        r.method = method_from_string(field);
        std::getline(ss, field, ',');
        r.mean_sum_rate = std::stod(field);
        std::getline(ss, field, ',');
        r.std_sum_rate = std::stod(field);
        std::getline(ss, field, ',');
        r.realizations = std::stoi(field);
        rows.push_back(r);
    }
    return rows;
}

std::string render_table(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "sweep_value      method        mean sum rate      std        n\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-16.6g %-12s %14.6f %10.6f %6d\n", r.sweep_value,
                      to_string(r.method).c_str(), r.mean_sum_rate, r.std_sum_rate,
                      r.realizations);
        os << buf;
    }
    return os.str();
}

}  // namespace risfarm
