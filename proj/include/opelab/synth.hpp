#pragma once

#include <array>
#include <string>
#include <vector>

#include "opelab/errors.hpp"
#include "opelab/exact.hpp"
#include "opelab/mdp.hpp"

namespace opelab {

/// Parameters of the standard 2-state / 100-action / d=10 synthetic instance.
///
/// p controls distribution shift: the behavior policy plays a=0 with
/// probability 1-p and spreads p uniformly over a in {1,...,99}, while the
/// target policy always plays a=0, so p -> 0 means behavior ~= target and
/// p -> 1 means the target action is barely logged.
struct SynthConfig {
    int H = 5;
    double p = 0.6;
    std::vector<int> alpha;        // per-stage XOR bits; empty = all zeros
    double encoding_scale = 1.0;   // applied to the 8 action-encoding coordinates
    NoiseSpec noise;
};

/// Uniform scale restoring ||phi||_2 <= sqrt(2) for callers that want the
/// feature-norm convention back.
inline constexpr double kUnitEncodingScale = 0.35355339059327373; // 1/sqrt(8)

/// Map an action index in [0,99] to its 8-bit sign encoding, most significant
/// bit first, with bit values 0 -> -1 and 1 -> +1.
inline std::array<double, 8> encode_action(int a) {
    if (a < 0 || a > 99)
        throw OutOfRange("encode_action: a = " + std::to_string(a) + " outside [0,99]");
    std::array<double, 8> e{};
    for (int i = 0; i < 8; ++i) e[i] = ((a >> (7 - i)) & 1) ? 1.0 : -1.0;
    return e;
}

struct SynthInstance {
    TabularLinearMDP mdp;
    Policy behavior;
    Policy target;
    InitialDistribution xi1;
};

namespace detail {
// delta(s,a) = 1 iff (s == 0) == (a == 0); the reward indicator coordinate.
inline double synth_delta(int s, int a) {
    return ((s == 0) == (a == 0)) ? 1.0 : 0.0;
}
} // namespace detail

/// Build the synthetic instance:
///   phi(s,a)   = (scale * encode(a), delta(s,a), 1 - delta(s,a))  in R^10
///   mu_h(s')   = (0,...,0, (1-s') xor alpha_h, s' xor alpha_h)
///   gamma_h    = (0,...,0, 1, 0)          so r(s,a) = delta(s,a)
///   target     = point mass on a = 0, behavior as described on SynthConfig,
///   xi1        = (1/2, 1/2).
/// Every transition row is an exact point mass, so the instance is a valid
/// linear MDP for any alpha sequence.
inline SynthInstance build_synth(const SynthConfig& cfg) {
    if (cfg.H < 1) throw ConfigError("synth: H must be >= 1");
    if (!(cfg.p > 0.0 && cfg.p < 1.0)) throw ConfigError("synth: p must be in (0,1)");
    if (!(cfg.encoding_scale > 0.0)) throw ConfigError("synth: encoding_scale must be > 0");
    std::vector<int> alpha = cfg.alpha;
    if (alpha.empty()) alpha.assign(cfg.H, 0);
    if (static_cast<int>(alpha.size()) != cfg.H)
        throw ConfigError("synth: alpha length " + std::to_string(alpha.size()) +
                          " != H = " + std::to_string(cfg.H));
    for (int b : alpha)
        if (b != 0 && b != 1) throw ConfigError("synth: alpha entries must be 0 or 1");

    constexpr int d = 10, S = 2, A = 100;
    SynthInstance inst;
    TabularLinearMDP& mdp = inst.mdp;
    mdp.d = d;
    mdp.H = cfg.H;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.noise = cfg.noise;

    mdp.phi.assign(S, std::vector<std::vector<double>>(A, std::vector<double>(d, 0.0)));
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const auto enc = encode_action(a);
            for (int i = 0; i < 8; ++i) mdp.phi[s][a][i] = cfg.encoding_scale * enc[i];
            const double delta = detail::synth_delta(s, a);
            mdp.phi[s][a][8] = delta;
            mdp.phi[s][a][9] = 1.0 - delta;
        }

    mdp.mu.assign(cfg.H, std::vector<std::vector<double>>(S, std::vector<double>(d, 0.0)));
    for (int h = 0; h < cfg.H; ++h)
        for (int sp = 0; sp < S; ++sp) {
            mdp.mu[h][sp][8] = static_cast<double>((1 - sp) ^ alpha[h]);
            mdp.mu[h][sp][9] = static_cast<double>(sp ^ alpha[h]);
        }

    mdp.gamma.assign(cfg.H, std::vector<double>(d, 0.0));
    for (int h = 0; h < cfg.H; ++h) mdp.gamma[h][8] = 1.0;

    inst.target = Policy::deterministic(cfg.H, S, A, [](int, int) { return 0; });
    inst.behavior.probs.assign(
        cfg.H, std::vector<std::vector<double>>(S, std::vector<double>(A, cfg.p / 99.0)));
    for (int h = 0; h < cfg.H; ++h)
        for (int s = 0; s < S; ++s) inst.behavior.probs[h][s][0] = 1.0 - cfg.p;

    inst.xi1.xi1 = {0.5, 0.5};

    if (const auto violations = validate(mdp); !violations.empty())
        throw Error("build_synth produced an invalid MDP: " + violations.front().what);
    return inst;
}

} // namespace opelab
