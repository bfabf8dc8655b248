#include "risfarm/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace risfarm {

using nn::Activation;
using nn::Linear;
using nn::Mlp;
using nn::ParamTensor;
using nn::RMatrix;

namespace {

// stream-id namespaces inside one training run
constexpr std::uint64_t kStreamSacInit = 1;
constexpr std::uint64_t kStreamRollout = 2;
constexpr std::uint64_t kStreamElbo = 3;
constexpr std::uint64_t kStreamSacBatch = 4;
constexpr std::uint64_t kStreamRelabel = 5;
constexpr std::uint64_t kStreamEncDecInit = 7;

RMatrix hconcat(const RMatrix& a, const RMatrix& b) {
    if (a.rows == 0) return b;
    if (b.rows == 0) return a;
    if (a.rows != b.rows) throw std::invalid_argument("hconcat: row mismatch");
    RMatrix c(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::copy(a.row(i), a.row(i) + a.cols, c.row(i));
        std::copy(b.row(i), b.row(i) + b.cols, c.row(i) + a.cols);
    }
    return c;
}

void add_into(RMatrix& dst, const RMatrix& src) {
    if (dst.rows != src.rows || dst.cols != src.cols)
        throw std::invalid_argument("add_into: shape mismatch");
    for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

nlohmann::json linear_to_json(const Linear& l) {
    nlohmann::json j;
    j["in"] = l.in_dim();
    j["out"] = l.out_dim();
    j["w"] = l.weights().value;
    j["b"] = l.bias().value;
    return j;
}

Linear linear_from_json(const nlohmann::json& j) {
    Linear l(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
    auto w = j.at("w").get<std::vector<double>>();
    auto b = j.at("b").get<std::vector<double>>();
    if (w.size() != l.weights().size() || b.size() != l.bias().size())
        throw std::invalid_argument("linear_from_json: size mismatch");
    l.weights().value = std::move(w);
    l.bias().value = std::move(b);
    return l;
}

std::vector<std::size_t> mlp_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<std::size_t> s;
    s.push_back(static_cast<std::size_t>(in));
    for (int h : hidden) s.push_back(static_cast<std::size_t>(h));
    s.push_back(static_cast<std::size_t>(out));
    return s;
}

void check_finite(double v, const char* what, int epoch) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "training diverged: " << what << " is not finite at epoch " << epoch;
        throw TrainingDiverged(os.str());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    ring_.reserve(capacity_);
}

void ReplayBuffer::add(Transition t) {
    const std::size_t slot = static_cast<std::size_t>(inserted_ % capacity_);
    if (slot < ring_.size()) {
        const int old_task = ring_[slot].task_id;
        auto& dq = by_task_[old_task];
        if (!dq.empty() && dq.front() == slot) {
            dq.pop_front();
        } else {
            auto it = std::find(dq.begin(), dq.end(), slot);
            if (it != dq.end()) dq.erase(it);
        }
        ring_[slot] = std::move(t);
    } else {
        ring_.push_back(std::move(t));
    }
    const int task = ring_[slot].task_id;
    if (!by_task_.count(task)) known_tasks_.push_back(task);
    by_task_[task].push_back(slot);
    next_ = static_cast<std::size_t>((inserted_ + 1) % capacity_);
    ++inserted_;
}

std::vector<std::size_t> ReplayBuffer::recent_slots(std::size_t window) const {
    const std::size_t n = ring_.size();
    std::size_t take = (window == 0 || window > n) ? n : window;
    std::vector<std::size_t> out;
    out.reserve(take);
    const bool full = inserted_ >= capacity_;
    const std::size_t oldest = full ? next_ : 0;
    // skip the first (n - take) insertions
    for (std::size_t i = n - take; i < n; ++i) out.push_back((oldest + i) % capacity_);
    return out;
}

std::vector<std::size_t> ReplayBuffer::sample_slots(std::size_t batch, Rng& rng,
                                                    std::size_t window) const {
    const std::vector<std::size_t> pool = recent_slots(window);
    if (pool.empty()) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
    if (batch > pool.size())
        throw std::invalid_argument("ReplayBuffer: batch exceeds population");
    // Floyd's combination sampling over pool indices
    std::unordered_set<std::size_t> chosen;
    std::vector<std::size_t> out;
    out.reserve(batch);
    for (std::size_t j = pool.size() - batch; j < pool.size(); ++j) {
        const std::size_t t = static_cast<std::size_t>(rng.next_u64() % (j + 1));
        if (chosen.count(t)) {
            chosen.insert(j);
            out.push_back(pool[j]);
        } else {
            chosen.insert(t);
            out.push_back(pool[t]);
        }
    }
    return out;
}

std::vector<const Transition*> ReplayBuffer::context(int task_id, std::size_t len) const {
    auto it = by_task_.find(task_id);
    if (it == by_task_.end() || it->second.empty())
        throw std::logic_error("ReplayBuffer: no transitions for task " + std::to_string(task_id));
    const auto& dq = it->second;
    const std::size_t take = std::min(len, dq.size());
    std::vector<const Transition*> out;
    out.reserve(take);
    for (std::size_t i = dq.size() - take; i < dq.size(); ++i) out.push_back(&ring_[dq[i]]);
    return out;
}

std::vector<std::vector<const Transition*>> ReplayBuffer::task_windows(
    int task_id, std::size_t len, std::size_t stride, std::size_t max_windows) const {
    auto it = by_task_.find(task_id);
    if (it == by_task_.end() || it->second.empty())
        throw std::logic_error("ReplayBuffer: no transitions for task " + std::to_string(task_id));
    const auto& dq = it->second;
    std::vector<std::vector<const Transition*>> out;
    if (stride == 0) stride = 1;
    std::size_t end = dq.size();
    while (out.size() < max_windows) {
        const std::size_t take = std::min(len, end);
        if (take == 0) break;
        std::vector<const Transition*> w;
        w.reserve(take);
        for (std::size_t i = end - take; i < end; ++i) w.push_back(&ring_[dq[i]]);
        out.push_back(std::move(w));
        if (end <= stride || end <= len) break;
        end -= stride;
    }
    return out;
}

// ---------------------------------------------------------------------------
// TaskEncoder

std::vector<double> TaskEncoder::transition_features(const Transition& t) {
    std::vector<double> f;
    f.reserve(t.s.values.size() + t.a.values.size() + 1 + t.s_next.values.size());
    f.insert(f.end(), t.s.values.begin(), t.s.values.end());
    f.insert(f.end(), t.a.values.begin(), t.a.values.end());
    f.push_back(t.r);
    f.insert(f.end(), t.s_next.values.begin(), t.s_next.values.end());
    return f;
}

TaskEncoder::TaskEncoder(const EncoderSizes& sizes) : sizes_(sizes) {
    if (sizes_.components < 1) throw std::invalid_argument("TaskEncoder: components must be >= 1");
    if (sizes_.latent_dim < 0) throw std::invalid_argument("TaskEncoder: negative latent dim");
    embed_ = Mlp(mlp_sizes(sizes_.input_dim, sizes_.embed_hidden, sizes_.embed_dim),
                 Activation::relu);
    trunk_ = Mlp(mlp_sizes(sizes_.embed_dim, sizes_.trunk_hidden, sizes_.trunk_out),
                 Activation::relu);
    y_head_ = Linear(sizes_.trunk_out, sizes_.components);
    if (sizes_.latent_dim > 0) {
        mean_head_ = Linear(sizes_.trunk_out, sizes_.components * sizes_.latent_dim);
        logvar_head_ = Linear(sizes_.trunk_out, sizes_.components * sizes_.latent_dim);
    }
}

void TaskEncoder::init(Rng& rng) {
    embed_.init(rng);
    trunk_.init(rng);
    y_head_.init(rng, Activation::tanh);
    if (sizes_.latent_dim > 0) {
        mean_head_.init(rng, Activation::tanh);
        logvar_head_.init(rng, Activation::tanh);
    }
    ++version_;
}

TaskEncoder::Forward TaskEncoder::encode(
    const std::vector<std::vector<const Transition*>>& contexts) {
    const std::size_t b = contexts.size();
    if (b == 0) throw std::invalid_argument("TaskEncoder::encode: empty batch");
    std::size_t total = 0;
    for (const auto& c : contexts) {
        if (c.empty()) throw std::invalid_argument("TaskEncoder::encode: empty context");
        total += c.size();
    }

    RMatrix x(total, static_cast<std::size_t>(sizes_.input_dim));
    std::size_t r = 0;
    for (const auto& c : contexts)
        for (const Transition* t : c) {
            const std::vector<double> f = transition_features(*t);
            if (f.size() != x.cols)
                throw std::invalid_argument("TaskEncoder::encode: feature width mismatch");
            std::copy(f.begin(), f.end(), x.row(r++));
        }

    const RMatrix e = embed_.forward(x);
    RMatrix pooled(b, e.cols);
    r = 0;
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t len = contexts[i].size();
        for (std::size_t k = 0; k < len; ++k) {
            const double* erow = e.row(r++);
            for (std::size_t j = 0; j < e.cols; ++j) pooled.at(i, j) += erow[j];
        }
        const double inv = 1.0 / static_cast<double>(len);
        for (std::size_t j = 0; j < e.cols; ++j) pooled.at(i, j) *= inv;
    }

    const RMatrix t = trunk_.forward(pooled);

    Forward fw;
    fw.logits = y_head_.forward(t);
    fw.q = RMatrix(b, fw.logits.cols);
    for (std::size_t i = 0; i < b; ++i) {
        const std::vector<double> p =
            nn::softmax(std::vector<double>(fw.logits.row(i), fw.logits.row(i) + fw.logits.cols));
        std::copy(p.begin(), p.end(), fw.q.row(i));
    }
    if (sizes_.latent_dim > 0) {
        fw.means = mean_head_.forward(t);
        fw.logvars = logvar_head_.forward(t);
    } else {
        fw.means = RMatrix(b, 0);
        fw.logvars = RMatrix(b, 0);
    }
    fw.context_lens.clear();
    for (const auto& c : contexts) fw.context_lens.push_back(c.size());
    last_lens_ = fw.context_lens;
    have_forward_ = true;
    return fw;
}

void TaskEncoder::backward(const RMatrix& dlogits, const RMatrix& dmeans,
                           const RMatrix& dlogvars) {
    if (!have_forward_) throw std::logic_error("TaskEncoder::backward without encode");
    RMatrix dt = y_head_.backward(dlogits);
    if (sizes_.latent_dim > 0) {
        add_into(dt, mean_head_.backward(dmeans));
        add_into(dt, logvar_head_.backward(dlogvars));
    }
    const RMatrix dpooled = trunk_.backward(dt);

    std::size_t total = 0;
    for (std::size_t len : last_lens_) total += len;
    RMatrix de(total, dpooled.cols);
    std::size_t r = 0;
    for (std::size_t i = 0; i < last_lens_.size(); ++i) {
        const double inv = 1.0 / static_cast<double>(last_lens_[i]);
        for (std::size_t k = 0; k < last_lens_[i]; ++k) {
            double* row = de.row(r++);
            const double* src = dpooled.row(i);
            for (std::size_t j = 0; j < de.cols; ++j) row[j] = src[j] * inv;
        }
    }
    embed_.backward(de);
}

TaskEncoding TaskEncoder::infer(const std::vector<const Transition*>& context, EncodeMode mode,
                                Rng* rng) {
    if (context.empty()) throw std::invalid_argument("TaskEncoder::infer: empty context");
    const Forward fw = encode({context});
    const int j_count = sizes_.components;
    const int l_dim = sizes_.latent_dim;

    int j = 0;
    if (j_count > 1) {
        if (mode == EncodeMode::sample) {
            if (!rng) throw std::invalid_argument("TaskEncoder::infer: sampling needs an rng");
            const double u = rng->uniform();
            double acc = 0.0;
            for (int i = 0; i < j_count; ++i) {
                acc += fw.q.at(0, i);
                if (u < acc || i == j_count - 1) {
                    j = i;
                    break;
                }
            }
        } else {
            for (int i = 1; i < j_count; ++i)
                if (fw.q.at(0, i) > fw.q.at(0, j)) j = i;
        }
    }

    TaskEncoding enc;
    enc.y = j + 1;
    enc.z.resize(l_dim);
    for (int l = 0; l < l_dim; ++l) {
        const double mu = fw.means.at(0, static_cast<std::size_t>(j * l_dim + l));
        if (mode == EncodeMode::sample) {
            const double lv = fw.logvars.at(0, static_cast<std::size_t>(j * l_dim + l));
            enc.z[l] = mu + std::exp(0.5 * lv) * rng->gaussian();
        } else {
            enc.z[l] = mu;
        }
    }
    return enc;
}

std::vector<ParamTensor*> TaskEncoder::params() {
    std::vector<ParamTensor*> out = embed_.params();
    for (auto* p : trunk_.params()) out.push_back(p);
    out.push_back(&y_head_.weights());
    out.push_back(&y_head_.bias());
    if (sizes_.latent_dim > 0) {
        out.push_back(&mean_head_.weights());
        out.push_back(&mean_head_.bias());
        out.push_back(&logvar_head_.weights());
        out.push_back(&logvar_head_.bias());
    }
    return out;
}

void TaskEncoder::zero_grad() {
    for (auto* p : params()) p->zero_grad();
}

std::string TaskEncoder::to_json() const {
    nlohmann::json j;
    j["input_dim"] = sizes_.input_dim;
    j["embed_hidden"] = sizes_.embed_hidden;
    j["embed_dim"] = sizes_.embed_dim;
    j["trunk_hidden"] = sizes_.trunk_hidden;
    j["trunk_out"] = sizes_.trunk_out;
    j["components"] = sizes_.components;
    j["latent_dim"] = sizes_.latent_dim;
    j["embed"] = nlohmann::json::parse(embed_.to_json());
    j["trunk"] = nlohmann::json::parse(trunk_.to_json());
    j["y_head"] = linear_to_json(y_head_);
    if (sizes_.latent_dim > 0) {
        j["mean_head"] = linear_to_json(mean_head_);
        j["logvar_head"] = linear_to_json(logvar_head_);
    }
    return j.dump();
}

TaskEncoder TaskEncoder::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    EncoderSizes s;
    s.input_dim = j.at("input_dim").get<int>();
    s.embed_hidden = j.at("embed_hidden").get<std::vector<int>>();
    s.embed_dim = j.at("embed_dim").get<int>();
    s.trunk_hidden = j.at("trunk_hidden").get<std::vector<int>>();
    s.trunk_out = j.at("trunk_out").get<int>();
    s.components = j.at("components").get<int>();
    s.latent_dim = j.at("latent_dim").get<int>();
    TaskEncoder enc(s);
    enc.embed_ = Mlp::from_json(j.at("embed").dump());
    enc.trunk_ = Mlp::from_json(j.at("trunk").dump());
    enc.y_head_ = linear_from_json(j.at("y_head"));
    if (s.latent_dim > 0) {
        enc.mean_head_ = linear_from_json(j.at("mean_head"));
        enc.logvar_head_ = linear_from_json(j.at("logvar_head"));
    }
    enc.version_ = 1;
    return enc;
}

// ---------------------------------------------------------------------------
// TaskDecoder

TaskDecoder::TaskDecoder(const DecoderSizes& sizes) : sizes_(sizes) {
    const int in = sizes_.obs_dim + sizes_.act_dim + sizes_.latent_dim;
    trunk_ = Mlp(mlp_sizes(in, sizes_.hidden, sizes_.trunk_out), Activation::relu);
    state_head_ = Linear(sizes_.trunk_out, sizes_.obs_dim);
    reward_head_ = Linear(sizes_.trunk_out, 1);
}

void TaskDecoder::init(Rng& rng) {
    trunk_.init(rng);
    state_head_.init(rng, Activation::tanh);
    reward_head_.init(rng, Activation::tanh);
}

std::pair<RMatrix, RMatrix> TaskDecoder::forward(const RMatrix& x) {
    const RMatrix h = trunk_.forward(x);
    return {state_head_.forward(h), reward_head_.forward(h)};
}

RMatrix TaskDecoder::backward(const RMatrix& dstate, const RMatrix& dreward, bool accumulate) {
    RMatrix dh = state_head_.backward(dstate, accumulate);
    add_into(dh, reward_head_.backward(dreward, accumulate));
    return trunk_.backward(dh, accumulate);
}

std::vector<ParamTensor*> TaskDecoder::params() {
    std::vector<ParamTensor*> out = trunk_.params();
    out.push_back(&state_head_.weights());
    out.push_back(&state_head_.bias());
    out.push_back(&reward_head_.weights());
    out.push_back(&reward_head_.bias());
    return out;
}

void TaskDecoder::zero_grad() {
    for (auto* p : params()) p->zero_grad();
}

std::string TaskDecoder::to_json() const {
    nlohmann::json j;
    j["obs_dim"] = sizes_.obs_dim;
    j["act_dim"] = sizes_.act_dim;
    j["latent_dim"] = sizes_.latent_dim;
    j["hidden"] = sizes_.hidden;
    j["trunk_out"] = sizes_.trunk_out;
    j["trunk"] = nlohmann::json::parse(trunk_.to_json());
    j["state_head"] = linear_to_json(state_head_);
    j["reward_head"] = linear_to_json(reward_head_);
    return j.dump();
}

TaskDecoder TaskDecoder::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    DecoderSizes s;
    s.obs_dim = j.at("obs_dim").get<int>();
    s.act_dim = j.at("act_dim").get<int>();
    s.latent_dim = j.at("latent_dim").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.trunk_out = j.at("trunk_out").get<int>();
    TaskDecoder dec(s);
    dec.trunk_ = Mlp::from_json(j.at("trunk").dump());
    dec.state_head_ = linear_from_json(j.at("state_head"));
    dec.reward_head_ = linear_from_json(j.at("reward_head"));
    return dec;
}

double decoder_loss(TaskDecoder& dec, const std::vector<const Transition*>& batch,
                    const std::vector<std::vector<double>>& z) {
    if (batch.empty()) throw std::invalid_argument("decoder_loss: empty batch");
    if (z.size() != batch.size()) throw std::invalid_argument("decoder_loss: z count mismatch");
    const std::size_t b = batch.size();
    const std::size_t in = static_cast<std::size_t>(dec.sizes().obs_dim + dec.sizes().act_dim +
                                                    dec.sizes().latent_dim);
    RMatrix x(b, in);
    for (std::size_t i = 0; i < b; ++i) {
        double* row = x.row(i);
        std::size_t off = 0;
        const Transition& t = *batch[i];
        std::copy(t.s.values.begin(), t.s.values.end(), row + off);
        off += t.s.values.size();
        std::copy(t.a.values.begin(), t.a.values.end(), row + off);
        off += t.a.values.size();
        std::copy(z[i].begin(), z[i].end(), row + off);
    }
    auto [sp, rp] = dec.forward(x);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const Transition& t = *batch[i];
        double e = 0.0;
        for (std::size_t j = 0; j < sp.cols; ++j) {
            const double d = sp.at(i, j) - t.s_next.values[j];
            e += d * d;
        }
        const double dr = rp.at(i, 0) - t.r;
        loss += 0.5 * e + 0.5 * dr * dr;
    }
    return loss / static_cast<double>(b);
}

// ---------------------------------------------------------------------------
// ELBO

ElboTerms elbo_loss(TaskEncoder& enc, TaskDecoder& dec, const ElboBatch& batch, double alpha_kl,
                    double beta_kl, const RMatrix* fixed_noise, Rng* rng, bool accumulate) {
    const std::size_t b = batch.targets.size();
    if (b == 0 || batch.contexts.size() != b)
        throw std::invalid_argument("elbo_loss: malformed batch");
    const int j_count = enc.sizes().components;
    const int l_dim = enc.sizes().latent_dim;
    const std::size_t s_dim = batch.targets[0]->s.values.size();
    const std::size_t a_dim = batch.targets[0]->a.values.size();
    const double inv_b = 1.0 / static_cast<double>(b);

    TaskEncoder::Forward fw = enc.encode(batch.contexts);

    // reparameterization noise, (b, j*L + l) layout
    RMatrix eps(b, static_cast<std::size_t>(j_count * l_dim));
    if (l_dim > 0) {
        if (fixed_noise) {
            if (fixed_noise->rows != b || fixed_noise->cols != eps.cols)
                throw std::invalid_argument("elbo_loss: fixed noise shape mismatch");
            eps = *fixed_noise;
        } else {
            if (!rng) throw std::invalid_argument("elbo_loss: need noise source");
            for (double& e : eps.v) e = rng->gaussian();
        }
    }

    RMatrix dmeans(b, eps.cols), dlogvars(b, eps.cols);
    RMatrix dq(b, static_cast<std::size_t>(j_count));
    std::vector<double> ldec(b * j_count, 0.0), klz(b * j_count, 0.0);

    for (int j = 0; j < j_count; ++j) {
        RMatrix x(b, s_dim + a_dim + static_cast<std::size_t>(l_dim));
        for (std::size_t i = 0; i < b; ++i) {
            const Transition& t = *batch.targets[i];
            double* row = x.row(i);
            std::copy(t.s.values.begin(), t.s.values.end(), row);
            std::copy(t.a.values.begin(), t.a.values.end(), row + s_dim);
            for (int l = 0; l < l_dim; ++l) {
                const std::size_t c = static_cast<std::size_t>(j * l_dim + l);
                const double sd = std::exp(0.5 * fw.logvars.at(i, c));
                row[s_dim + a_dim + l] = fw.means.at(i, c) + sd * eps.at(i, c);
            }
        }
        auto [sp, rp] = dec.forward(x);

        RMatrix dstate(b, sp.cols), dreward(b, 1);
        for (std::size_t i = 0; i < b; ++i) {
            const Transition& t = *batch.targets[i];
            double e = 0.0;
            for (std::size_t c = 0; c < sp.cols; ++c) {
                const double d = sp.at(i, c) - t.s_next.values[c];
                e += d * d;
            }
            const double dr = rp.at(i, 0) - t.r;
            ldec[i * j_count + j] = 0.5 * e + 0.5 * dr * dr;

            double kl = 0.0;
            for (int l = 0; l < l_dim; ++l) {
                const std::size_t c = static_cast<std::size_t>(j * l_dim + l);
                const double mu = fw.means.at(i, c);
                const double lv = fw.logvars.at(i, c);
                kl += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
            }
            klz[i * j_count + j] = kl;

            if (accumulate) {
                const double wq = fw.q.at(i, static_cast<std::size_t>(j)) * inv_b;
                for (std::size_t c = 0; c < sp.cols; ++c)
                    dstate.at(i, c) = wq * (sp.at(i, c) - t.s_next.values[c]);
                dreward.at(i, 0) = wq * dr;
            }
        }

        if (accumulate) {
            const RMatrix dx = dec.backward(dstate, dreward, true);
            for (std::size_t i = 0; i < b; ++i) {
                const double wq = fw.q.at(i, static_cast<std::size_t>(j)) * inv_b;
                for (int l = 0; l < l_dim; ++l) {
                    const std::size_t c = static_cast<std::size_t>(j * l_dim + l);
                    const double dz = dx.at(i, s_dim + a_dim + static_cast<std::size_t>(l));
                    const double lv = fw.logvars.at(i, c);
                    const double sd = std::exp(0.5 * lv);
                    dmeans.at(i, c) += dz + wq * alpha_kl * fw.means.at(i, c);
                    dlogvars.at(i, c) += dz * 0.5 * sd * eps.at(i, c) +
                                         wq * alpha_kl * 0.5 * (std::exp(lv) - 1.0);
                }
            }
        }
    }

    ElboTerms terms;
    for (std::size_t i = 0; i < b; ++i) {
        double kly = 0.0;
        for (int j = 0; j < j_count; ++j) {
            const double q = fw.q.at(i, static_cast<std::size_t>(j));
            if (q > 0.0) kly += q * std::log(q * j_count);
        }
        terms.kl_y += kly * inv_b;
        for (int j = 0; j < j_count; ++j) {
            const double q = fw.q.at(i, static_cast<std::size_t>(j));
            const double t_bj = -ldec[i * j_count + j] - alpha_kl * klz[i * j_count + j];
            terms.elbo += q * t_bj * inv_b;
            terms.decoder_loss += q * ldec[i * j_count + j] * inv_b;
            terms.kl_z += q * klz[i * j_count + j] * inv_b;
            if (accumulate)
                dq.at(i, static_cast<std::size_t>(j)) =
                    (-t_bj + beta_kl * (std::log(std::max(q, 1e-300) * j_count) + 1.0)) * inv_b;
        }
    }
    terms.elbo -= beta_kl * terms.kl_y;

    if (accumulate) {
        RMatrix dlogits(b, static_cast<std::size_t>(j_count));
        for (std::size_t i = 0; i < b; ++i) {
            double dot = 0.0;
            for (int j = 0; j < j_count; ++j)
                dot += dq.at(i, static_cast<std::size_t>(j)) *
                       fw.q.at(i, static_cast<std::size_t>(j));
            for (int j = 0; j < j_count; ++j) {
                const std::size_t c = static_cast<std::size_t>(j);
                dlogits.at(i, c) = fw.q.at(i, c) * (dq.at(i, c) - dot);
            }
        }
        enc.backward(dlogits, dmeans, dlogvars);
    }
    return terms;
}

// ---------------------------------------------------------------------------
// TaskMap

void TaskMap::store(std::string label, std::vector<double> z) {
    for (double v : z)
        if (!std::isfinite(v)) throw std::invalid_argument("TaskMap::store: non-finite encoding");
    entries_.push_back(Entry{std::move(label), std::move(z)});
}

const TaskMap::Entry& TaskMap::lookup(const std::vector<double>& z_query) const {
    if (entries_.empty()) throw std::logic_error("TaskMap::lookup: empty map");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].z.size() != z_query.size())
            throw std::invalid_argument("TaskMap::lookup: dimension mismatch");
        double d = 0.0;
        for (std::size_t l = 0; l < z_query.size(); ++l) {
            const double x = entries_[i].z[l] - z_query[l];
            d += x * x;
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return entries_[best];
}

std::vector<double> TaskMap::centroid() const {
    if (entries_.empty()) throw std::logic_error("TaskMap::centroid: empty map");
    std::vector<double> c(entries_[0].z.size(), 0.0);
    for (const auto& e : entries_)
        for (std::size_t l = 0; l < c.size(); ++l) c[l] += e.z[l];
    for (double& v : c) v /= static_cast<double>(entries_.size());
    return c;
}

std::string TaskMap::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : entries_) {
        nlohmann::json o;
        o["label"] = e.label;
        o["z"] = e.z;
        j.push_back(std::move(o));
    }
    return j.dump();
}

TaskMap TaskMap::from_json(const std::string& text) {
    TaskMap m;
    for (const auto& o : nlohmann::json::parse(text))
        m.entries_.push_back(Entry{o.at("label").get<std::string>(),
                                   o.at("z").get<std::vector<double>>()});
    return m;
}

// ---------------------------------------------------------------------------
// SacCore

SacCore::SacCore(const SacConfig& cfg) : cfg_(cfg), log_alpha_(1, 1) {
    const int in = cfg_.obs_dim + cfg_.cond_dim;
    policy_ = Mlp(mlp_sizes(in, cfg_.policy_hidden, 2 * cfg_.act_dim), Activation::relu);
    q1_ = Mlp(mlp_sizes(in + cfg_.act_dim, cfg_.q_hidden, 1), Activation::relu);
    q2_ = Mlp(mlp_sizes(in + cfg_.act_dim, cfg_.q_hidden, 1), Activation::relu);
    q1t_ = q1_;
    q2t_ = q2_;
    log_alpha_.value[0] = cfg_.init_log_alpha;
    opt_policy_ = nn::AdamState(policy_.params(), cfg_.lr);
    opt_q1_ = nn::AdamState(q1_.params(), cfg_.lr);
    opt_q2_ = nn::AdamState(q2_.params(), cfg_.lr);
    std::vector<ParamTensor*> ap{&log_alpha_};
    opt_alpha_ = nn::AdamState(ap, cfg_.lr);
}

void SacCore::init(Rng& rng) {
    policy_.init(rng);
    q1_.init(rng);
    q2_.init(rng);
    nn::polyak_update(q1t_, q1_, 1.0);
    nn::polyak_update(q2t_, q2_, 1.0);
}

double SacCore::alpha() const { return std::exp(log_alpha_.value[0]); }

std::vector<double> SacCore::act(const std::vector<double>& obs, const std::vector<double>& cond,
                                 bool deterministic, Rng* rng) {
    std::vector<double> x = obs;
    x.insert(x.end(), cond.begin(), cond.end());
    const std::vector<double> out = policy_.forward1(x);
    const int a_dim = cfg_.act_dim;
    std::vector<double> mean(out.begin(), out.begin() + a_dim);
    if (deterministic) {
        std::vector<double> a(a_dim);
        for (int i = 0; i < a_dim; ++i) a[i] = std::tanh(mean[i]);
        return a;
    }
    if (!rng) throw std::invalid_argument("SacCore::act: sampling needs rng");
    std::vector<double> log_std(out.begin() + a_dim, out.end());
    return nn::gaussian_head_sample(mean, log_std, *rng).action;
}

namespace {

struct SquashedBatch {
    RMatrix a;          // tanh actions
    RMatrix sig_eps;    // sigma * eps per element
    std::vector<double> log_prob;
    std::vector<std::uint8_t> clamped;  // per element of log_std
};

SquashedBatch squash_sample(const RMatrix& out, const RMatrix& eps, int a_dim) {
    const std::size_t b = out.rows;
    SquashedBatch s;
    s.a = RMatrix(b, static_cast<std::size_t>(a_dim));
    s.sig_eps = RMatrix(b, static_cast<std::size_t>(a_dim));
    s.log_prob.assign(b, 0.0);
    s.clamped.assign(b * a_dim, 0);
    constexpr double kLogSqrt2Pi = 0.9189385332046727;
    for (std::size_t i = 0; i < b; ++i) {
        double lp = 0.0;
        for (int c = 0; c < a_dim; ++c) {
            const double mu = out.at(i, static_cast<std::size_t>(c));
            const double ls_raw = out.at(i, static_cast<std::size_t>(a_dim + c));
            const double ls = std::clamp(ls_raw, nn::kLogStdMin, nn::kLogStdMax);
            if (ls != ls_raw) s.clamped[i * a_dim + c] = 1;
            const double sd = std::exp(ls);
            const double e = eps.at(i, static_cast<std::size_t>(c));
            const double u = mu + sd * e;
            const double a = std::tanh(u);
            s.a.at(i, static_cast<std::size_t>(c)) = a;
            s.sig_eps.at(i, static_cast<std::size_t>(c)) = sd * e;
            const double sp = -2.0 * u > 0.0
                                  ? -2.0 * u + std::log1p(std::exp(2.0 * u))
                                  : std::log1p(std::exp(-2.0 * u));
            lp += -0.5 * e * e - ls - kLogSqrt2Pi;
            lp -= 2.0 * (std::numbers::ln2 - u - sp);
        }
        s.log_prob[i] = lp;
    }
    return s;
}

}  // namespace

std::vector<double> SacCore::compute_targets(const SacBatch& batch, Rng& rng) {
    const std::size_t b = batch.obs.rows;
    const int a_dim = cfg_.act_dim;
    const double a_val = alpha();

    const RMatrix xn = hconcat(batch.obs_next, batch.cond_next);
    const RMatrix outn = policy_.forward(xn);
    RMatrix epsn(b, static_cast<std::size_t>(a_dim));
    for (double& e : epsn.v) e = rng.gaussian();
    const SquashedBatch sn = squash_sample(outn, epsn, a_dim);

    const RMatrix xqn = hconcat(xn, sn.a);
    const RMatrix q1n = q1t_.forward(xqn);
    const RMatrix q2n = q2t_.forward(xqn);
    std::vector<double> y(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double qmin = std::min(q1n.at(i, 0), q2n.at(i, 0));
        const double not_term = batch.terminal.empty() ? 1.0 : (batch.terminal[i] ? 0.0 : 1.0);
        y[i] = cfg_.reward_scale * batch.reward[i] +
               cfg_.gamma * not_term * (qmin - a_val * sn.log_prob[i]);
    }
    return y;
}

SacUpdateStats SacCore::update(const SacBatch& batch, Rng& rng) {
    const std::size_t b = batch.obs.rows;
    const int a_dim = cfg_.act_dim;
    if (b == 0) throw std::invalid_argument("SacCore::update: empty batch");
    const double inv_b = 1.0 / static_cast<double>(b);
    const double a_val = alpha();
    const double target_entropy =
        cfg_.target_entropy != 0.0 ? cfg_.target_entropy : -static_cast<double>(a_dim);

    const std::vector<double> y = compute_targets(batch, rng);

    // critics
    const RMatrix x = hconcat(batch.obs, batch.cond);
    const RMatrix xq = hconcat(x, batch.act);
    SacUpdateStats stats;
    for (int which = 0; which < 2; ++which) {
        Mlp& q = which == 0 ? q1_ : q2_;
        nn::AdamState& opt = which == 0 ? opt_q1_ : opt_q2_;
        const RMatrix v = q.forward(xq);
        RMatrix dv(b, 1);
        double loss = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double d = v.at(i, 0) - y[i];
            loss += d * d;
            dv.at(i, 0) = 2.0 * d * inv_b;
        }
        loss *= inv_b;
        (which == 0 ? stats.q1_loss : stats.q2_loss) = loss;
        q.zero_grad();
        q.backward(dv);
        opt.step(q.params());
    }

    // policy
    const RMatrix out = policy_.forward(x);
    RMatrix eps(b, static_cast<std::size_t>(a_dim));
    for (double& e : eps.v) e = rng.gaussian();
    const SquashedBatch sc = squash_sample(out, eps, a_dim);

    const RMatrix xqa = hconcat(x, sc.a);
    const RMatrix qa1 = q1_.forward(xqa);
    const RMatrix qa2 = q2_.forward(xqa);
    RMatrix up1(b, 1), up2(b, 1);
    double policy_loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const bool first = qa1.at(i, 0) <= qa2.at(i, 0);
        (first ? up1 : up2).at(i, 0) = -inv_b;
        policy_loss += a_val * sc.log_prob[i] - std::min(qa1.at(i, 0), qa2.at(i, 0));
    }
    policy_loss *= inv_b;
    stats.policy_loss = policy_loss;

    const RMatrix dxq1 = q1_.backward(up1, /*accumulate=*/false);
    const RMatrix dxq2 = q2_.backward(up2, /*accumulate=*/false);

    RMatrix dout(b, static_cast<std::size_t>(2 * a_dim));
    const std::size_t a_off = x.cols;
    for (std::size_t i = 0; i < b; ++i) {
        for (int c = 0; c < a_dim; ++c) {
            const double da = dxq1.at(i, a_off + c) + dxq2.at(i, a_off + c);
            const double a = sc.a.at(i, static_cast<std::size_t>(c));
            const double one_m_a2 = 1.0 - a * a;
            const double se = sc.sig_eps.at(i, static_cast<std::size_t>(c));
            // d/dmu [alpha*logp - qmin]
            dout.at(i, static_cast<std::size_t>(c)) =
                a_val * inv_b * (2.0 * a) + da * one_m_a2;
            // d/dlogstd, zero where the clamp is active
            double dls = a_val * inv_b * (-1.0 + 2.0 * a * se) + da * one_m_a2 * se;
            if (sc.clamped[i * a_dim + c]) dls = 0.0;
            dout.at(i, static_cast<std::size_t>(a_dim + c)) = dls;
        }
    }
    policy_.zero_grad();
    policy_.backward(dout);
    opt_policy_.step(policy_.params());

    // temperature
    double mean_lp = 0.0;
    for (std::size_t i = 0; i < b; ++i) mean_lp += sc.log_prob[i];
    mean_lp *= inv_b;
    log_alpha_.grad[0] = -std::exp(log_alpha_.value[0]) * (mean_lp + target_entropy);
    std::vector<ParamTensor*> ap{&log_alpha_};
    opt_alpha_.step(ap);

    nn::polyak_update(q1t_, q1_, cfg_.tau_polyak);
    nn::polyak_update(q2t_, q2_, cfg_.tau_polyak);

    stats.alpha = alpha();
    stats.mean_entropy = -mean_lp;
    return stats;
}

std::vector<ParamTensor*> SacCore::params() {
    std::vector<ParamTensor*> out = policy_.params();
    for (auto* p : q1_.params()) out.push_back(p);
    for (auto* p : q2_.params()) out.push_back(p);
    for (auto* p : q1t_.params()) out.push_back(p);
    for (auto* p : q2t_.params()) out.push_back(p);
    out.push_back(&log_alpha_);
    return out;
}

std::string SacCore::to_json() const {
    nlohmann::json j;
    j["obs_dim"] = cfg_.obs_dim;
    j["cond_dim"] = cfg_.cond_dim;
    j["act_dim"] = cfg_.act_dim;
    j["policy_hidden"] = cfg_.policy_hidden;
    j["q_hidden"] = cfg_.q_hidden;
    j["lr"] = cfg_.lr;
    j["gamma"] = cfg_.gamma;
    j["tau_polyak"] = cfg_.tau_polyak;
    j["reward_scale"] = cfg_.reward_scale;
    j["init_log_alpha"] = cfg_.init_log_alpha;
    j["target_entropy"] = cfg_.target_entropy;
    j["log_alpha"] = log_alpha_.value[0];
    j["policy"] = nlohmann::json::parse(policy_.to_json());
    j["q1"] = nlohmann::json::parse(q1_.to_json());
    j["q2"] = nlohmann::json::parse(q2_.to_json());
    j["q1_target"] = nlohmann::json::parse(q1t_.to_json());
    j["q2_target"] = nlohmann::json::parse(q2t_.to_json());
    return j.dump();
}

SacCore SacCore::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    SacConfig cfg;
    cfg.obs_dim = j.at("obs_dim").get<int>();
    cfg.cond_dim = j.at("cond_dim").get<int>();
    cfg.act_dim = j.at("act_dim").get<int>();
    cfg.policy_hidden = j.at("policy_hidden").get<std::vector<int>>();
    cfg.q_hidden = j.at("q_hidden").get<std::vector<int>>();
    cfg.lr = j.at("lr").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.tau_polyak = j.at("tau_polyak").get<double>();
    cfg.reward_scale = j.at("reward_scale").get<double>();
    cfg.init_log_alpha = j.at("init_log_alpha").get<double>();
    cfg.target_entropy = j.at("target_entropy").get<double>();
    SacCore core(cfg);
    core.log_alpha_.value[0] = j.at("log_alpha").get<double>();
    core.policy_ = Mlp::from_json(j.at("policy").dump());
    core.q1_ = Mlp::from_json(j.at("q1").dump());
    core.q2_ = Mlp::from_json(j.at("q2").dump());
    core.q1t_ = Mlp::from_json(j.at("q1_target").dump());
    core.q2t_ = Mlp::from_json(j.at("q2_target").dump());
    return core;
}

// ---------------------------------------------------------------------------
// DdpgCore

DdpgCore::DdpgCore(const DdpgConfig& cfg) : cfg_(cfg) {
    actor_ = Mlp(mlp_sizes(cfg_.obs_dim, cfg_.actor_hidden, cfg_.act_dim), Activation::relu);
    critic_ = Mlp(mlp_sizes(cfg_.obs_dim + cfg_.act_dim, cfg_.critic_hidden, 1),
                  Activation::relu);
    actor_t_ = actor_;
    critic_t_ = critic_;
    opt_actor_ = nn::AdamState(actor_.params(), cfg_.actor_lr > 0.0 ? cfg_.actor_lr : cfg_.lr);
    opt_critic_ = nn::AdamState(critic_.params(), cfg_.lr);
}

void DdpgCore::init(Rng& rng) {
    actor_.init(rng);
    critic_.init(rng);
    nn::polyak_update(actor_t_, actor_, 1.0);
    nn::polyak_update(critic_t_, critic_, 1.0);
}

std::vector<double> DdpgCore::act(const std::vector<double>& obs, double noise_sigma, Rng* rng) {
    std::vector<double> a = actor_.forward1(obs);
    for (double& v : a) v = std::tanh(v);
    if (noise_sigma > 0.0) {
        if (!rng) throw std::invalid_argument("DdpgCore::act: exploration needs rng");
        for (double& v : a) v = std::clamp(v + noise_sigma * rng->gaussian(), -1.0, 1.0);
    }
    return a;
}

std::vector<double> DdpgCore::compute_targets(const DdpgBatch& batch) {
    const std::size_t b = batch.obs.rows;
    RMatrix an = actor_t_.forward(batch.obs_next);
    for (double& v : an.v) v = std::tanh(v);
    const RMatrix qn = critic_t_.forward(hconcat(batch.obs_next, an));
    std::vector<double> y(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double not_term = batch.terminal.empty() ? 1.0 : (batch.terminal[i] ? 0.0 : 1.0);
        y[i] = cfg_.reward_scale * batch.reward[i] + cfg_.gamma * not_term * qn.at(i, 0);
    }
    return y;
}

DdpgUpdateStats DdpgCore::update(const DdpgBatch& batch) {
    const std::size_t b = batch.obs.rows;
    if (b == 0) throw std::invalid_argument("DdpgCore::update: empty batch");
    const double inv_b = 1.0 / static_cast<double>(b);

    const std::vector<double> y = compute_targets(batch);

    DdpgUpdateStats stats;
    const RMatrix v = critic_.forward(hconcat(batch.obs, batch.act));
    RMatrix dv(b, 1);
    for (std::size_t i = 0; i < b; ++i) {
        const double d = v.at(i, 0) - y[i];
        stats.critic_loss += d * d;
        dv.at(i, 0) = 2.0 * d * inv_b;
    }
    stats.critic_loss *= inv_b;
    critic_.zero_grad();
    critic_.backward(dv);
    opt_critic_.step(critic_.params());

    const RMatrix pre = actor_.forward(batch.obs);
    RMatrix a(b, pre.cols);
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] = std::tanh(pre.v[i]);
    const RMatrix qa = critic_.forward(hconcat(batch.obs, a));
    RMatrix up(b, 1);
    for (std::size_t i = 0; i < b; ++i) {
        stats.actor_loss -= qa.at(i, 0);
        up.at(i, 0) = -inv_b;
    }
    stats.actor_loss *= inv_b;
    const RMatrix dxq = critic_.backward(up, /*accumulate=*/false);
    RMatrix dpre(b, a.cols);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t c = 0; c < a.cols; ++c) {
            const double av = a.at(i, c);
            dpre.at(i, c) = dxq.at(i, batch.obs.cols + c) * (1.0 - av * av);
        }
    actor_.zero_grad();
    actor_.backward(dpre);
    opt_actor_.step(actor_.params());

    nn::polyak_update(actor_t_, actor_, cfg_.tau_polyak);
    nn::polyak_update(critic_t_, critic_, cfg_.tau_polyak);
    return stats;
}

std::vector<ParamTensor*> DdpgCore::params() {
    std::vector<ParamTensor*> out = actor_.params();
    for (auto* p : critic_.params()) out.push_back(p);
    for (auto* p : actor_t_.params()) out.push_back(p);
    for (auto* p : critic_t_.params()) out.push_back(p);
    return out;
}

std::string DdpgCore::to_json() const {
    nlohmann::json j;
    j["obs_dim"] = cfg_.obs_dim;
    j["act_dim"] = cfg_.act_dim;
    j["actor_hidden"] = cfg_.actor_hidden;
    j["critic_hidden"] = cfg_.critic_hidden;
    j["lr"] = cfg_.lr;
    j["actor_lr"] = cfg_.actor_lr;
    j["gamma"] = cfg_.gamma;
    j["tau_polyak"] = cfg_.tau_polyak;
    j["reward_scale"] = cfg_.reward_scale;
    j["sigma_expl"] = cfg_.sigma_expl;
    j["actor"] = nlohmann::json::parse(actor_.to_json());
    j["critic"] = nlohmann::json::parse(critic_.to_json());
    j["actor_target"] = nlohmann::json::parse(actor_t_.to_json());
    j["critic_target"] = nlohmann::json::parse(critic_t_.to_json());
    return j.dump();
}

DdpgCore DdpgCore::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    DdpgConfig cfg;
    cfg.obs_dim = j.at("obs_dim").get<int>();
    cfg.act_dim = j.at("act_dim").get<int>();
    cfg.actor_hidden = j.at("actor_hidden").get<std::vector<int>>();
    cfg.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
    cfg.lr = j.at("lr").get<double>();
    cfg.actor_lr = j.at("actor_lr").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.tau_polyak = j.at("tau_polyak").get<double>();
    cfg.reward_scale = j.at("reward_scale").get<double>();
    cfg.sigma_expl = j.at("sigma_expl").get<double>();
    DdpgCore core(cfg);
    core.actor_ = Mlp::from_json(j.at("actor").dump());
    core.critic_ = Mlp::from_json(j.at("critic").dump());
    core.actor_t_ = Mlp::from_json(j.at("actor_target").dump());
    core.critic_t_ = Mlp::from_json(j.at("critic_target").dump());
    return core;
}

// ---------------------------------------------------------------------------
// metrics CSV

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    out << "epoch,elbo,decoder_loss,kl_z,kl_y,policy_loss,critic_loss,alpha,eval_return\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
    };
    for (const auto& r : rows) {
        out << r.epoch;
        put(r.elbo);
        put(r.decoder_loss);
        put(r.kl_z);
        put(r.kl_y);
        put(r.policy_loss);
        put(r.critic_loss);
        put(r.alpha);
        put(r.eval_return);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// FarmAgent

FarmAgent::FarmAgent(const SystemConfig& sys, const EnvOptions& envopt, const FarmConfig& cfg,
                     std::uint64_t seed)
    : sys_(sys), envopt_(envopt), cfg_(cfg), seed_(seed), buf_(cfg.buffer_capacity) {
    sys_.validate();
    const int obs = observation_dim(sys_);
    const int act = action_dim(sys_);

    SacConfig sc;
    sc.obs_dim = obs;
    sc.cond_dim = cfg_.latent_dim;
    sc.act_dim = act;
    sc.policy_hidden = cfg_.policy_hidden;
    sc.q_hidden = cfg_.q_hidden;
    sc.lr = cfg_.lr;
    sc.gamma = cfg_.gamma;
    sc.tau_polyak = cfg_.tau_polyak;
    sc.reward_scale = cfg_.reward_scale;
    sc.init_log_alpha = cfg_.init_log_alpha;
    sac_ = SacCore(sc);
    Rng sac_init = Rng::stream(seed_, kStreamSacInit);
    sac_.init(sac_init);

    EncoderSizes es;
    es.input_dim = 2 * obs + act + 1;
    es.embed_hidden = cfg_.embed_hidden;
    es.embed_dim = cfg_.embed_dim;
    es.trunk_hidden = cfg_.trunk_hidden;
    es.trunk_out = cfg_.trunk_out;
    es.components = cfg_.components;
    es.latent_dim = cfg_.latent_dim;
    enc_ = TaskEncoder(es);

    DecoderSizes ds;
    ds.obs_dim = obs;
    ds.act_dim = act;
    ds.latent_dim = cfg_.latent_dim;
    ds.hidden = cfg_.decoder_hidden;
    ds.trunk_out = cfg_.decoder_trunk_out;
    dec_ = TaskDecoder(ds);

    Rng encdec_init = Rng::stream(seed_, kStreamEncDecInit);
    enc_.init(encdec_init);
    dec_.init(encdec_init);
}

std::vector<EpochMetrics> FarmAgent::train(const std::vector<Task>& tasks) {
    if (tasks.empty()) throw std::invalid_argument("FarmAgent::train: no tasks");
    Rng rollout_rng = Rng::stream(seed_, kStreamRollout);
    Rng elbo_rng = Rng::stream(seed_, kStreamElbo);
    Rng sacb_rng = Rng::stream(seed_, kStreamSacBatch);
    Rng relabel_rng = Rng::stream(seed_, kStreamRelabel);

    nn::AdamState opt_enc(enc_.params(), cfg_.lr);
    nn::AdamState opt_dec(dec_.params(), cfg_.lr);

    RisEnv env(sys_, envopt_);
    const std::size_t relabel_window =
        cfg_.relabel_window < 0 ? 0 : static_cast<std::size_t>(cfg_.relabel_window);

    std::vector<EpochMetrics> metrics;
    for (int iter = 0; iter < cfg_.iterations; ++iter) {
        EpochMetrics row;
        row.epoch = iter;

        // rollout phase
        for (const Task& task : tasks) {
            for (int ep = 0; ep < cfg_.episodes_per_task; ++ep) {
                Observation obs = env.reset(task);
                std::deque<Transition> ctx;
                while (!env.done()) {
                    TaskEncoding te;
                    te.z.assign(cfg_.latent_dim, 0.0);
                    if (!ctx.empty()) {
                        std::vector<const Transition*> ptrs;
                        ptrs.reserve(ctx.size());
                        for (const auto& t : ctx) ptrs.push_back(&t);
                        te = enc_.infer(ptrs, EncodeMode::sample, &rollout_rng);
                    }
                    const std::vector<double> u =
                        sac_.act(obs.values, te.z, /*deterministic=*/false, &rollout_rng);
                    const ActionVector a = scale_policy_output(u, sys_);
                    const StepResult res = env.step(a);

                    Transition tr;
                    tr.s = obs;
                    tr.a = a;
                    tr.r = res.reward;
                    tr.s_next = res.obs;
                    tr.task_id = task.id;
                    tr.t = env.t() - 1;
                    tr.y = te.y;
                    tr.z = te.z;
                    tr.annot_version = enc_.version();
                    ctx.push_back(tr);
                    while (ctx.size() > static_cast<std::size_t>(cfg_.context_len))
                        ctx.pop_front();
                    buf_.add(std::move(tr));
                    obs = res.obs;
                }
            }
        }

        // representation phase
        int elbo_done = 0;
        for (int u = 0; u < cfg_.elbo_updates; ++u) {
            if (buf_.size() < static_cast<std::size_t>(cfg_.elbo_batch)) break;
            ElboBatch eb;
            const auto slots = buf_.sample_slots(cfg_.elbo_batch, elbo_rng);
            for (std::size_t slot : slots) {
                eb.targets.push_back(&buf_.at(slot));
                eb.contexts.push_back(buf_.context(buf_.at(slot).task_id,
                                                   static_cast<std::size_t>(cfg_.context_len)));
            }
            enc_.zero_grad();
            dec_.zero_grad();
            const ElboTerms terms =
                elbo_loss(enc_, dec_, eb, cfg_.alpha_kl, cfg_.beta_kl, nullptr, &elbo_rng, true);
            check_finite(terms.elbo, "elbo", iter);
            auto ep = enc_.params();
            auto dp = dec_.params();
            opt_enc.step(ep);
            opt_dec.step(dp);
            enc_.bump_version();
            row.elbo += terms.elbo;
            row.decoder_loss += terms.decoder_loss;
            row.kl_z += terms.kl_z;
            row.kl_y += terms.kl_y;
            ++elbo_done;
        }
        if (elbo_done > 0) {
            row.elbo /= elbo_done;
            row.decoder_loss /= elbo_done;
            row.kl_z /= elbo_done;
            row.kl_y /= elbo_done;
        }

        // relabel phase: fresh (y, z) for the recent window from the current encoder
        {
            std::unordered_map<int, TaskEncoder::Forward> dist_by_task;
            for (std::size_t slot : buf_.recent_slots(relabel_window)) {
                Transition& tr = buf_.at_mut(slot);
                auto it = dist_by_task.find(tr.task_id);
                if (it == dist_by_task.end()) {
                    const auto ctx =
                        buf_.context(tr.task_id, static_cast<std::size_t>(cfg_.context_len));
                    it = dist_by_task.emplace(tr.task_id, enc_.encode({ctx})).first;
                }
                const TaskEncoder::Forward& fw = it->second;
                int j = 0;
                if (cfg_.components > 1) {
                    const double u = relabel_rng.uniform();
                    double acc = 0.0;
                    for (int i = 0; i < cfg_.components; ++i) {
                        acc += fw.q.at(0, i);
                        if (u < acc || i == cfg_.components - 1) {
                            j = i;
                            break;
                        }
                    }
                }
                tr.y = j + 1;
                tr.z.assign(cfg_.latent_dim, 0.0);
                for (int l = 0; l < cfg_.latent_dim; ++l) {
                    const std::size_t c = static_cast<std::size_t>(j * cfg_.latent_dim + l);
                    tr.z[l] = fw.means.at(0, c) +
                              std::exp(0.5 * fw.logvars.at(0, c)) * relabel_rng.gaussian();
                }
                tr.annot_version = enc_.version();
            }
        }

        // policy phase
        int sac_done = 0;
        for (int u = 0; u < cfg_.sac_updates; ++u) {
            if (buf_.size() < static_cast<std::size_t>(cfg_.sac_batch)) break;
            const auto slots = buf_.sample_slots(cfg_.sac_batch, sacb_rng, relabel_window);
            SacBatch sb;
            const std::size_t bs = slots.size();
            const int obs_d = observation_dim(sys_);
            const int act_d = action_dim(sys_);
            sb.obs = RMatrix(bs, static_cast<std::size_t>(obs_d));
            sb.cond = RMatrix(bs, static_cast<std::size_t>(cfg_.latent_dim));
            sb.act = RMatrix(bs, static_cast<std::size_t>(act_d));
            sb.obs_next = RMatrix(bs, static_cast<std::size_t>(obs_d));
            sb.cond_next = RMatrix(bs, static_cast<std::size_t>(cfg_.latent_dim));
            sb.reward.resize(bs);
            sb.terminal.assign(bs, 0);
            for (std::size_t i = 0; i < bs; ++i) {
                const Transition& tr = buf_.at(slots[i]);
                if (tr.annot_version != enc_.version())
                    throw std::logic_error("FarmAgent: stale task annotation in policy batch");
                std::copy(tr.s.values.begin(), tr.s.values.end(), sb.obs.row(i));
                std::copy(tr.s_next.values.begin(), tr.s_next.values.end(), sb.obs_next.row(i));
                std::copy(tr.z.begin(), tr.z.end(), sb.cond.row(i));
                std::copy(tr.z.begin(), tr.z.end(), sb.cond_next.row(i));
                const std::vector<double> u_act = unscale_action(tr.a, sys_);
                std::copy(u_act.begin(), u_act.end(), sb.act.row(i));
                sb.reward[i] = tr.r;
            }
            const SacUpdateStats st = sac_.update(sb, sacb_rng);
            check_finite(st.q1_loss, "critic loss", iter);
            check_finite(st.policy_loss, "policy loss", iter);
            row.critic_loss += 0.5 * (st.q1_loss + st.q2_loss);
            row.policy_loss += st.policy_loss;
            row.alpha = st.alpha;
            ++sac_done;
        }
        if (sac_done > 0) {
            row.critic_loss /= sac_done;
            row.policy_loss /= sac_done;
        }

        row.eval_return = evaluate_policy(tasks);
        check_finite(row.eval_return, "eval return", iter);
        metrics.push_back(row);
    }

    populate_task_map(tasks);
    return metrics;
}

double FarmAgent::evaluate_policy(const std::vector<Task>& tasks) {
    RisEnv env(sys_, envopt_);
    const int n_tasks = std::min<int>(cfg_.eval_tasks, static_cast<int>(tasks.size()));
    if (n_tasks == 0) return 0.0;
    double total = 0.0;
    for (int ti = 0; ti < n_tasks; ++ti) {
        Observation obs = env.reset(tasks[ti]);
        std::deque<Transition> ctx;
        double ep_reward = 0.0;
        int steps = 0;
        while (!env.done()) {
            std::vector<double> z(cfg_.latent_dim, 0.0);
            if (!ctx.empty()) {
                std::vector<const Transition*> ptrs;
                for (const auto& t : ctx) ptrs.push_back(&t);
                z = enc_.infer(ptrs, EncodeMode::evaluate, nullptr).z;
            }
            const std::vector<double> u = sac_.act(obs.values, z, true, nullptr);
            const ActionVector a = scale_policy_output(u, sys_);
            const StepResult res = env.step(a);
            Transition tr;
            tr.s = obs;
            tr.a = a;
            tr.r = res.reward;
            tr.s_next = res.obs;
            tr.task_id = tasks[ti].id;
            ctx.push_back(std::move(tr));
            while (ctx.size() > static_cast<std::size_t>(cfg_.context_len)) ctx.pop_front();
            ep_reward += res.reward;
            ++steps;
            obs = res.obs;
        }
        total += ep_reward / std::max(steps, 1);
    }
    return total / n_tasks;
}

void FarmAgent::populate_task_map(const std::vector<Task>& tasks) {
    map_ = TaskMap();
    for (const Task& task : tasks) {
        std::vector<std::vector<const Transition*>> windows;
        try {
            windows = buf_.task_windows(task.id, static_cast<std::size_t>(cfg_.context_len),
                                        std::max<std::size_t>(cfg_.context_len / 2, 1), 8);
        } catch (const std::logic_error&) {
            continue;  // task never produced transitions
        }
        std::vector<double> mean_z(cfg_.latent_dim, 0.0);
        for (const auto& w : windows) {
            const TaskEncoding te = enc_.infer(w, EncodeMode::evaluate, nullptr);
            for (int l = 0; l < cfg_.latent_dim; ++l) mean_z[l] += te.z[l];
        }
        if (!windows.empty())
            for (double& v : mean_z) v /= static_cast<double>(windows.size());
        map_.store("task_" + std::to_string(task.id), std::move(mean_z));
    }
}

TaskEncoding FarmAgent::encode_eval(const std::vector<const Transition*>& context) {
    return enc_.infer(context, EncodeMode::evaluate, nullptr);
}

ActionVector FarmAgent::farm_act(const std::vector<const Transition*>& context,
                                 const Observation& s) {
    std::vector<double> z(cfg_.latent_dim, 0.0);
    if (static_cast<int>(context.size()) < cfg_.min_context) {
        if (map_.size() > 0) z = map_.centroid();
    } else {
        z = enc_.infer(context, EncodeMode::evaluate, nullptr).z;
        if (cfg_.mapping && map_.size() > 0 && cfg_.latent_dim > 0) {
            const TaskMap::Entry& near = map_.lookup(z);
            double d2 = 0.0;
            for (int l = 0; l < cfg_.latent_dim; ++l) {
                const double d = near.z[l] - z[l];
                d2 += d * d;
            }
            if (!(std::sqrt(d2) > cfg_.map_delta)) z = near.z;
        }
    }
    const std::vector<double> u = sac_.act(s.values, z, true, nullptr);
    return scale_policy_output(u, sys_);
}

std::uint64_t FarmAgent::param_checksum() {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](const std::vector<double>& v) {
        for (double x : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof(bits));
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xFF;
                h *= 1099511628211ull;
            }
        }
    };
    for (auto* p : sac_.params()) mix(p->value);
    for (auto* p : enc_.params()) mix(p->value);
    for (auto* p : dec_.params()) mix(p->value);
    return h;
}

namespace {

nlohmann::json farm_config_to_json(const FarmConfig& c) {
    nlohmann::json j;
    j["components"] = c.components;
    j["latent_dim"] = c.latent_dim;
    j["context_len"] = c.context_len;
    j["min_context"] = c.min_context;
    j["alpha_kl"] = c.alpha_kl;
    j["beta_kl"] = c.beta_kl;
    j["embed_hidden"] = c.embed_hidden;
    j["embed_dim"] = c.embed_dim;
    j["trunk_hidden"] = c.trunk_hidden;
    j["trunk_out"] = c.trunk_out;
    j["decoder_hidden"] = c.decoder_hidden;
    j["decoder_trunk_out"] = c.decoder_trunk_out;
    j["policy_hidden"] = c.policy_hidden;
    j["q_hidden"] = c.q_hidden;
    j["lr"] = c.lr;
    j["gamma"] = c.gamma;
    j["tau_polyak"] = c.tau_polyak;
    j["reward_scale"] = c.reward_scale;
    j["init_log_alpha"] = c.init_log_alpha;
    j["iterations"] = c.iterations;
    j["episodes_per_task"] = c.episodes_per_task;
    j["elbo_updates"] = c.elbo_updates;
    j["elbo_batch"] = c.elbo_batch;
    j["sac_updates"] = c.sac_updates;
    j["sac_batch"] = c.sac_batch;
    j["buffer_capacity"] = c.buffer_capacity;
    j["relabel_window"] = c.relabel_window;
    j["eval_tasks"] = c.eval_tasks;
    j["mapping"] = c.mapping;
    j["map_delta"] = std::isinf(c.map_delta) ? -1.0 : c.map_delta;
    return j;
}

FarmConfig farm_config_from_json(const nlohmann::json& j) {
    FarmConfig c;
    c.components = j.at("components").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.context_len = j.at("context_len").get<int>();
    c.min_context = j.at("min_context").get<int>();
    c.alpha_kl = j.at("alpha_kl").get<double>();
    c.beta_kl = j.at("beta_kl").get<double>();
    c.embed_hidden = j.at("embed_hidden").get<std::vector<int>>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.trunk_hidden = j.at("trunk_hidden").get<std::vector<int>>();
    c.trunk_out = j.at("trunk_out").get<int>();
    c.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
    c.decoder_trunk_out = j.at("decoder_trunk_out").get<int>();
    c.policy_hidden = j.at("policy_hidden").get<std::vector<int>>();
    c.q_hidden = j.at("q_hidden").get<std::vector<int>>();
    c.lr = j.at("lr").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.tau_polyak = j.at("tau_polyak").get<double>();
    c.reward_scale = j.at("reward_scale").get<double>();
    c.init_log_alpha = j.at("init_log_alpha").get<double>();
    c.iterations = j.at("iterations").get<int>();
    c.episodes_per_task = j.at("episodes_per_task").get<int>();
    c.elbo_updates = j.at("elbo_updates").get<int>();
    c.elbo_batch = j.at("elbo_batch").get<int>();
    c.sac_updates = j.at("sac_updates").get<int>();
    c.sac_batch = j.at("sac_batch").get<int>();
    c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
    c.relabel_window = j.at("relabel_window").get<long>();
    c.eval_tasks = j.at("eval_tasks").get<int>();
    c.mapping = j.at("mapping").get<bool>();
    const double delta = j.at("map_delta").get<double>();
    c.map_delta = delta < 0.0 ? std::numeric_limits<double>::infinity() : delta;
    return c;
}

}  // namespace

std::string FarmAgent::to_json() const {
    nlohmann::json j;
    j["format"] = "risfarm-farm-agent-v1";
    j["system_config"] = nlohmann::json::parse(system_config_to_json(sys_));
    j["episode_len"] = envopt_.episode_len;
    j["normalize_obs"] = envopt_.normalize_obs;
    j["farm_config"] = farm_config_to_json(cfg_);
    j["seed"] = seed_;
    j["sac"] = nlohmann::json::parse(sac_.to_json());
    j["encoder"] = nlohmann::json::parse(enc_.to_json());
    j["decoder"] = nlohmann::json::parse(dec_.to_json());
    j["task_map"] = nlohmann::json::parse(map_.to_json());
    return j.dump();
}

FarmAgent FarmAgent::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "risfarm-farm-agent-v1")
        throw std::invalid_argument("FarmAgent::from_json: unknown format");
    const SystemConfig sys = parse_system_config(j.at("system_config").dump());
    EnvOptions envopt;
    envopt.episode_len = j.at("episode_len").get<int>();
    envopt.normalize_obs = j.at("normalize_obs").get<bool>();
    const FarmConfig cfg = farm_config_from_json(j.at("farm_config"));
    FarmAgent agent(sys, envopt, cfg, j.at("seed").get<std::uint64_t>());
    agent.sac_ = SacCore::from_json(j.at("sac").dump());
    agent.enc_ = TaskEncoder::from_json(j.at("encoder").dump());
    agent.dec_ = TaskDecoder::from_json(j.at("decoder").dump());
    agent.map_ = TaskMap::from_json(j.at("task_map").dump());
    return agent;
}

// ---------------------------------------------------------------------------
// DdpgAgent

DdpgAgent::DdpgAgent(const SystemConfig& sys, const EnvOptions& envopt,
                     const DdpgTrainConfig& cfg, std::uint64_t seed)
    : sys_(sys), envopt_(envopt), cfg_(cfg), seed_(seed), buf_(cfg.buffer_capacity) {
    sys_.validate();
    DdpgConfig dc;
    dc.obs_dim = observation_dim(sys_);
    dc.act_dim = action_dim(sys_);
    dc.actor_hidden = cfg_.actor_hidden;
    dc.critic_hidden = cfg_.critic_hidden;
    dc.lr = cfg_.lr;
    dc.gamma = cfg_.gamma;
    dc.tau_polyak = cfg_.tau_polyak;
    dc.reward_scale = cfg_.reward_scale;
    dc.sigma_expl = cfg_.sigma_expl;
    core_ = DdpgCore(dc);
    Rng init = Rng::stream(seed_, kStreamSacInit);
    core_.init(init);
}

std::vector<EpochMetrics> DdpgAgent::train(const std::vector<Task>& tasks) {
    if (tasks.empty()) throw std::invalid_argument("DdpgAgent::train: no tasks");
    Rng rollout_rng = Rng::stream(seed_, kStreamRollout);
    Rng batch_rng = Rng::stream(seed_, kStreamSacBatch);
    RisEnv env(sys_, envopt_);

    std::vector<EpochMetrics> metrics;
    for (int iter = 0; iter < cfg_.iterations; ++iter) {
        EpochMetrics row;
        row.epoch = iter;

        for (const Task& task : tasks) {
            for (int ep = 0; ep < cfg_.episodes_per_task; ++ep) {
                Observation obs = env.reset(task);
                while (!env.done()) {
                    const std::vector<double> u =
                        core_.act(obs.values, cfg_.sigma_expl, &rollout_rng);
                    const ActionVector a = scale_policy_output(u, sys_);
                    const StepResult res = env.step(a);
                    Transition tr;
                    tr.s = obs;
                    tr.a = a;
                    tr.r = res.reward;
                    tr.s_next = res.obs;
                    tr.task_id = task.id;
                    tr.t = env.t() - 1;
                    buf_.add(std::move(tr));
                    obs = res.obs;
                }
            }
        }

        int done_updates = 0;
        for (int u = 0; u < cfg_.updates; ++u) {
            if (buf_.size() < static_cast<std::size_t>(cfg_.batch)) break;
            const auto slots = buf_.sample_slots(cfg_.batch, batch_rng);
            DdpgBatch db;
            const std::size_t bs = slots.size();
            const int obs_d = observation_dim(sys_);
            const int act_d = action_dim(sys_);
            db.obs = RMatrix(bs, static_cast<std::size_t>(obs_d));
            db.act = RMatrix(bs, static_cast<std::size_t>(act_d));
            db.obs_next = RMatrix(bs, static_cast<std::size_t>(obs_d));
            db.reward.resize(bs);
            db.terminal.assign(bs, 0);
            for (std::size_t i = 0; i < bs; ++i) {
                const Transition& tr = buf_.at(slots[i]);
                std::copy(tr.s.values.begin(), tr.s.values.end(), db.obs.row(i));
                std::copy(tr.s_next.values.begin(), tr.s_next.values.end(), db.obs_next.row(i));
                const std::vector<double> ua = unscale_action(tr.a, sys_);
                std::copy(ua.begin(), ua.end(), db.act.row(i));
                db.reward[i] = tr.r;
            }
            const DdpgUpdateStats st = core_.update(db);
            check_finite(st.critic_loss, "critic loss", iter);
            check_finite(st.actor_loss, "actor loss", iter);
            row.critic_loss += st.critic_loss;
            row.policy_loss += st.actor_loss;
            ++done_updates;
        }
        if (done_updates > 0) {
            row.critic_loss /= done_updates;
            row.policy_loss /= done_updates;
        }

        row.eval_return = evaluate_policy(tasks);
        check_finite(row.eval_return, "eval return", iter);
        metrics.push_back(row);
    }
    return metrics;
}

double DdpgAgent::evaluate_policy(const std::vector<Task>& tasks) {
    RisEnv env(sys_, envopt_);
    const int n_tasks = std::min<int>(cfg_.eval_tasks, static_cast<int>(tasks.size()));
    if (n_tasks == 0) return 0.0;
    double total = 0.0;
    for (int ti = 0; ti < n_tasks; ++ti) {
        Observation obs = env.reset(tasks[ti]);
        double ep_reward = 0.0;
        int steps = 0;
        while (!env.done()) {
            const std::vector<double> u = core_.act(obs.values, 0.0, nullptr);
            const StepResult res = env.step(scale_policy_output(u, sys_));
            ep_reward += res.reward;
            ++steps;
            obs = res.obs;
        }
        total += ep_reward / std::max(steps, 1);
    }
    return total / n_tasks;
}

ActionVector DdpgAgent::act_eval(const Observation& s) {
    return scale_policy_output(core_.act(s.values, 0.0, nullptr), sys_);
}

std::string DdpgAgent::to_json() const {
    nlohmann::json j;
    j["format"] = "risfarm-ddpg-agent-v1";
    j["system_config"] = nlohmann::json::parse(system_config_to_json(sys_));
    j["episode_len"] = envopt_.episode_len;
    j["normalize_obs"] = envopt_.normalize_obs;
    j["seed"] = seed_;
    nlohmann::json tc;
    tc["actor_hidden"] = cfg_.actor_hidden;
    tc["critic_hidden"] = cfg_.critic_hidden;
    tc["lr"] = cfg_.lr;
    tc["gamma"] = cfg_.gamma;
    tc["tau_polyak"] = cfg_.tau_polyak;
    tc["reward_scale"] = cfg_.reward_scale;
    tc["sigma_expl"] = cfg_.sigma_expl;
    tc["iterations"] = cfg_.iterations;
    tc["episodes_per_task"] = cfg_.episodes_per_task;
    tc["updates"] = cfg_.updates;
    tc["batch"] = cfg_.batch;
    tc["buffer_capacity"] = cfg_.buffer_capacity;
    tc["eval_tasks"] = cfg_.eval_tasks;
    j["train_config"] = std::move(tc);
    j["core"] = nlohmann::json::parse(core_.to_json());
    return j.dump();
}

DdpgAgent DdpgAgent::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "risfarm-ddpg-agent-v1")
        throw std::invalid_argument("DdpgAgent::from_json: unknown format");
    const SystemConfig sys = parse_system_config(j.at("system_config").dump());
    EnvOptions envopt;
    envopt.episode_len = j.at("episode_len").get<int>();
    envopt.normalize_obs = j.at("normalize_obs").get<bool>();
    const auto& tc = j.at("train_config");
    DdpgTrainConfig cfg;
    cfg.actor_hidden = tc.at("actor_hidden").get<std::vector<int>>();
    cfg.critic_hidden = tc.at("critic_hidden").get<std::vector<int>>();
    cfg.lr = tc.at("lr").get<double>();
    cfg.gamma = tc.at("gamma").get<double>();
    cfg.tau_polyak = tc.at("tau_polyak").get<double>();
    cfg.reward_scale = tc.at("reward_scale").get<double>();
    cfg.sigma_expl = tc.at("sigma_expl").get<double>();
    cfg.iterations = tc.at("iterations").get<int>();
    cfg.episodes_per_task = tc.at("episodes_per_task").get<int>();
    cfg.updates = tc.at("updates").get<int>();
    cfg.batch = tc.at("batch").get<int>();
    cfg.buffer_capacity = tc.at("buffer_capacity").get<std::size_t>();
    cfg.eval_tasks = tc.at("eval_tasks").get<int>();
    DdpgAgent agent(sys, envopt, cfg, j.at("seed").get<std::uint64_t>());
    agent.core_ = DdpgCore::from_json(j.at("core").dump());
    return agent;
}

}  // namespace risfarm
