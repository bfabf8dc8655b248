#include "risfarm/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace risfarm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double offdiag_rel_norm(const CMatrix& f) {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < f.rows(); ++i)
        for (std::size_t j = 0; j < f.cols(); ++j) {
            const double p = std::norm(f.at(i, j));
            if (i == j)
                diag += p;
            else
                off += p;
        }
    if (diag == 0.0) return off == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(off / diag);
}

double sum_rate_of(const CMatrix& f, double noise_w) {
    double sum = 0.0;
    for (std::size_t k = 0; k < f.rows(); ++k) {
        double signal = 0.0, interference = 0.0;
        for (std::size_t i = 0; i < f.cols(); ++i) {
            const double p = std::norm(f.at(k, i));
            if (i == k)
                signal = p;
            else
                interference += p;
        }
        sum += std::log2(1.0 + signal / (interference + noise_w));
    }
    return sum;
}

// Rank-1 slices of the effective channel: h_eff(theta) = sum_n e^{j theta_n} C_n
// with C_n = outer(h2[:,n], h1[n,:]).
std::vector<CMatrix> rank1_components(const ChannelState& state) {
    const std::size_t k_users = state.h2.rows();
    const std::size_t n = state.h2.cols();
    const std::size_t m = state.h1.cols();
    std::vector<CMatrix> c(n, CMatrix(k_users, m));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < k_users; ++k) {
            const cdouble h2kj = state.h2.at(k, j);
            for (std::size_t i = 0; i < m; ++i) c[j].at(k, i) = h2kj * state.h1.at(j, i);
        }
    return c;
}

CMatrix assemble_h_eff(const std::vector<CMatrix>& comps, const std::vector<cdouble>& phi) {
    CMatrix h(comps[0].rows(), comps[0].cols());
    for (std::size_t j = 0; j < comps.size(); ++j) {
        const cdouble p = phi[j];
        for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += p * comps[j].data()[i];
    }
    return h;
}

}  // namespace

void SfpSettings::validate() const {
    if (max_iters < 1) throw std::invalid_argument("SfpSettings: max_iters must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("SfpSettings: tol must be positive");
    if (restarts < 0) throw std::invalid_argument("SfpSettings: restarts must be >= 0");
    if (grid < 2) throw std::invalid_argument("SfpSettings: grid must be >= 2");
}

Beamformer zf_beamformer(const CMatrix& h_eff, double p_max) {
    const std::size_t k = h_eff.rows(), m = h_eff.cols();
    if (k > m) throw std::invalid_argument("zf_beamformer: more users than antennas");

    const CMatrix h_h = hermitian(h_eff);
    const CMatrix gram = matmul(h_eff, h_h);  // K x K, Hermitian PSD
    CMatrix w0;
    try {
        w0 = matmul(h_h, solve_hermitian_system(gram, CMatrix::identity(k)));
    } catch (const SingularMatrixError&) {
        throw SingularMatrixError("zf_beamformer: rank-deficient effective channel");
    }

    // A solve that went through only thanks to regularization leaves
    // residual interference; treat that as a degenerate draw too.
    if (offdiag_rel_norm(matmul(h_eff, w0)) > 1e-8)
        throw SingularMatrixError("zf_beamformer: effective channel numerically rank deficient");

    return normalize_power(w0, p_max);
}

std::pair<Beamformer, PhaseShift> zfr_policy(const ChannelState& state, Rng& rng,
                                             const SystemConfig& cfg) {
    PhaseShift phase;
    phase.theta.resize(cfg.n_ris);
    for (double& th : phase.theta) th = rng.uniform(0.0, kTwoPi);
    const CMatrix h_eff = effective_channel(state, phase);
    return {zf_beamformer(h_eff, cfg.p_max), phase};
}

SfpResult sfp_policy(const ChannelState& state, const SfpSettings& settings,
                     const SystemConfig& cfg) {
    settings.validate();
    const double noise = cfg.noise_power_w();
    const std::size_t n = state.h2.cols();
    const std::vector<CMatrix> comps = rank1_components(state);
    constexpr double kInvGolden = 0.6180339887498949;

    for (int attempt = 0; attempt <= settings.restarts; ++attempt) {
        Rng rng = Rng::stream(settings.seed, static_cast<std::uint64_t>(attempt));
        std::vector<double> theta(n);
        for (double& th : theta) th = rng.uniform(0.0, kTwoPi);
        std::vector<cdouble> phi(n);
        for (std::size_t i = 0; i < n; ++i) phi[i] = std::polar(1.0, theta[i]);

        try {
            Beamformer w;
            double obj = -1.0;
            std::vector<double> trace;
            bool have_w = false;

            for (int iter = 0; iter < settings.max_iters; ++iter) {
                const double prev_obj = obj;
                CMatrix h_eff = assemble_h_eff(comps, phi);

                const Beamformer w_cand = zf_beamformer(h_eff, cfg.p_max);
                const double cand_obj = sum_rate_of(matmul(h_eff, w_cand.w), noise);
                if (!have_w || cand_obj > obj) {
                    w = w_cand;
                    obj = cand_obj;
                    have_w = true;
                }

                // Per-element sweep with W held fixed. D_n = C_n * W lets a
                // phase candidate be scored from a K x K update.
                std::vector<CMatrix> d(n);
                for (std::size_t j = 0; j < n; ++j) d[j] = matmul(comps[j], w.w);
                CMatrix f = matmul(h_eff, w.w);

                CMatrix f_base(f.rows(), f.cols());
                CMatrix cand(f.rows(), f.cols());
                for (std::size_t el = 0; el < n; ++el) {
                    const cdouble cur = phi[el];
                    for (std::size_t i = 0; i < f.size(); ++i)
                        f_base.data()[i] = f.data()[i] - cur * d[el].data()[i];

                    auto score = [&](double th) {
                        const cdouble p = std::polar(1.0, th);
                        for (std::size_t i = 0; i < cand.size(); ++i)
                            cand.data()[i] = f_base.data()[i] + p * d[el].data()[i];
                        return sum_rate_of(cand, noise);
                    };

                    double best_th = theta[el];
                    double best_val = obj;
                    const double step = kTwoPi / settings.grid;
                    int best_g = -1;
                    for (int g = 0; g < settings.grid; ++g) {
                        const double th = g * step;
                        const double v = score(th);
                        if (v > best_val) {
                            best_val = v;
                            best_th = th;
                            best_g = g;
                        }
                    }
                    if (best_g >= 0) {
                        // golden-section pass over the bracketing interval
                        double lo = (best_g - 1) * step, hi = (best_g + 1) * step;
                        double x1 = hi - kInvGolden * (hi - lo);
                        double x2 = lo + kInvGolden * (hi - lo);
                        double f1 = score(x1), f2 = score(x2);
                        for (int it = 0; it < settings.golden_iters; ++it) {
                            if (f1 < f2) {
                                lo = x1;
                                x1 = x2;
                                f1 = f2;
                                x2 = lo + kInvGolden * (hi - lo);
                                f2 = score(x2);
                            } else {
                                hi = x2;
                                x2 = x1;
                                f2 = f1;
                                x1 = hi - kInvGolden * (hi - lo);
                                f1 = score(x1);
                            }
                        }
                        const double xm = 0.5 * (lo + hi);
                        const double fm = score(xm);
                        if (fm > best_val) {
                            best_val = fm;
                            best_th = xm;
                        }
                    }

                    if (best_val > obj) {
                        theta[el] = wrap_angle(best_th);
                        const cdouble p_new = std::polar(1.0, theta[el]);
                        phi[el] = p_new;
                        for (std::size_t i = 0; i < f.size(); ++i)
                            f.data()[i] = f_base.data()[i] + p_new * d[el].data()[i];
                        obj = best_val;
                    }
                }

                trace.push_back(obj);
                if (iter > 0 && obj - prev_obj < settings.tol * std::max(prev_obj, 1e-12)) break;
            }

            SfpResult res;
            res.w = w;
            res.phase.theta = theta;
            res.trace = std::move(trace);
            return res;
        } catch (const SingularMatrixError&) {
            if (attempt == settings.restarts) throw;
        }
    }
    throw SingularMatrixError("sfp_policy: unreachable");
}

}  // namespace risfarm
