#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "risfarm/channel.hpp"
#include "risfarm/link.hpp"

namespace risfarm {

struct SfpSettings {
    int max_iters = 10;     // outer (beamformer refit + phase sweep) rounds
    double tol = 1e-3;      // relative sum-rate improvement stop threshold
    int restarts = 3;       // fresh random phase inits after a degenerate ZF
    int grid = 64;          // phase candidates per element
    int golden_iters = 16;  // golden-section refinement steps per element
    std::uint64_t seed = 0; // drives the phase initialization

    void validate() const;
};

/// W = h_eff^H (h_eff h_eff^H)^{-1}, rescaled so tr(W^H W) = p_max exactly.
/// Throws SingularMatrixError when h_eff is (numerically) rank deficient.
Beamformer zf_beamformer(const CMatrix& h_eff, double p_max);

/// Uniform random phases, then zero-forcing on the induced channel.
std::pair<Beamformer, PhaseShift> zfr_policy(const ChannelState& state, Rng& rng,
                                             const SystemConfig& cfg);

struct SfpResult {
    Beamformer w;
    PhaseShift phase;
    std::vector<double> trace;  // accepted sum rate after each outer round
};

/// Iterative phase optimization under zero-forcing: alternates a ZF refit
/// (accepted only when it improves the sum rate) with a per-element
/// grid-plus-golden-section sweep. The trace is monotone non-decreasing.
SfpResult sfp_policy(const ChannelState& state, const SfpSettings& settings,
                     const SystemConfig& cfg);

}  // namespace risfarm
