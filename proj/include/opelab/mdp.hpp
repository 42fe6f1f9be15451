#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opelab/errors.hpp"
#include "opelab/numerics.hpp"

namespace opelab {

enum class NoiseKind { none, uniform };

/// Additive reward noise. Realized rewards are truncated back into [0,1],
/// so r = r_h(s,a) + eps always lands in range.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double half_width = 0.0; // in [0,1]

    bool operator==(const NoiseSpec&) const = default;
};

/// Finite-state, finite-action, time-inhomogeneous linear MDP given by a
/// feature table phi(s,a) in R^d, per-stage measures mu_h(s') in R^d and
/// per-stage reward vectors gamma_h in R^d. Transitions and expected rewards
/// are P_h(s'|s,a) = <phi(s,a), mu_h(s')> and r_h(s,a) = <phi(s,a), gamma_h>.
///
/// Stages are 1-based (h in [1,H]) everywhere in the public API; vectors are
/// stored 0-based internally.
struct TabularLinearMDP {
    int d = 0;
    int H = 0;
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<std::vector<double>>> phi;   // [s][a] -> R^d
    std::vector<std::vector<std::vector<double>>> mu;    // [h-1][s'] -> R^d
    std::vector<std::vector<double>> gamma;              // [h-1] -> R^d
    NoiseSpec noise;

    const std::vector<double>& features(int s, int a) const { return phi[s][a]; }

    double mean_reward(int h, int s, int a) const {
        return dot(phi[s][a], gamma[h - 1]);
    }

    void check_stage(int h) const {
        if (h < 1 || h > H)
            throw InvalidStage("stage " + std::to_string(h) + " outside [1," +
                               std::to_string(H) + "]");
    }

    bool operator==(const TabularLinearMDP&) const = default;
};

/// Per-stage action distribution table pi_h(a|s), shape H x n_states x n_actions.
struct Policy {
    std::vector<std::vector<std::vector<double>>> probs; // [h-1][s][a]

    static Policy deterministic(int H, int n_states, int n_actions,
                                const std::function<int(int h, int s)>& action) {
        Policy pi;
        pi.probs.assign(H, std::vector<std::vector<double>>(
                               n_states, std::vector<double>(n_actions, 0.0)));
        for (int h = 1; h <= H; ++h)
            for (int s = 0; s < n_states; ++s) pi.probs[h - 1][s][action(h, s)] = 1.0;
        return pi;
    }

    static Policy uniform(int H, int n_states, int n_actions) {
        Policy pi;
        pi.probs.assign(H, std::vector<std::vector<double>>(
                               n_states, std::vector<double>(
                                             n_actions, 1.0 / n_actions)));
        return pi;
    }

    const std::vector<double>& row(int h, int s) const { return probs[h - 1][s]; }

    bool operator==(const Policy&) const = default;
};

struct InitialDistribution {
    std::vector<double> xi1;

    bool operator==(const InitialDistribution&) const = default;
};

/// One failed model invariant; violations are data, not exceptions.
struct Violation {
    int h = 0; // 0 when stage-independent
    int s = -1;
    int a = -1;
    std::string what;
    double magnitude = 0.0;
};

/// Check the linear-MDP invariants: transition rows built from <phi, mu>
/// must be nonnegative and sum to one, expected rewards must lie in [0,1],
/// and ||gamma_h||_2 <= 1. Returns the empty vector iff the model is valid.
inline std::vector<Violation> validate(const TabularLinearMDP& mdp) {
    std::vector<Violation> out;
    for (int h = 1; h <= mdp.H; ++h) {
        double gnorm2 = 0.0;
        for (double g : mdp.gamma[h - 1]) gnorm2 += g * g;
        if (std::sqrt(gnorm2) > 1.0 + 1e-12)
            out.push_back({h, -1, -1, "||gamma_h||_2 > 1", std::sqrt(gnorm2)});
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                double row_sum = 0.0;
                for (int sp = 0; sp < mdp.n_states; ++sp) {
                    const double p = dot(mdp.phi[s][a], mdp.mu[h - 1][sp]);
                    row_sum += p;
                    if (p < -1e-12)
                        out.push_back({h, s, a, "negative transition probability", p});
                }
                if (std::abs(row_sum - 1.0) > 1e-10)
                    out.push_back({h, s, a, "transition row sum != 1", row_sum});
                const double r = mdp.mean_reward(h, s, a);
                if (r < -1e-12 || r > 1.0 + 1e-12)
                    out.push_back({h, s, a, "expected reward outside [0,1]", r});
            }
        }
    }
    return out;
}

/// Feature norms above 1 break the normalization convention but not the
/// model itself (the standard synthetic instance uses +/-1 encodings), so
/// they are reported separately from validate().
inline std::vector<Violation> feature_norm_warnings(const TabularLinearMDP& mdp) {
    std::vector<Violation> out;
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double n2 = 0.0;
            for (double f : mdp.phi[s][a]) n2 += f * f;
            if (std::sqrt(n2) > 1.0 + 1e-12)
                out.push_back({0, s, a, "||phi(s,a)||_2 > 1", std::sqrt(n2)});
        }
    return out;
}

/// Reject malformed policies: wrong shape, negative entries, or rows that
/// do not sum to one within 1e-12.
inline void check_policy(const TabularLinearMDP& mdp, const Policy& pi,
                         const char* who = "policy") {
    if (static_cast<int>(pi.probs.size()) != mdp.H)
        throw std::invalid_argument(std::string(who) + ": expected H stages");
    for (int h = 1; h <= mdp.H; ++h) {
        if (static_cast<int>(pi.probs[h - 1].size()) != mdp.n_states)
            throw std::invalid_argument(std::string(who) + ": wrong state count");
        for (int s = 0; s < mdp.n_states; ++s) {
            const auto& row = pi.probs[h - 1][s];
            if (static_cast<int>(row.size()) != mdp.n_actions)
                throw std::invalid_argument(std::string(who) + ": wrong action count");
            double sum = 0.0;
            for (double q : row) {
                if (q < 0.0) throw std::invalid_argument(std::string(who) + ": negative probability");
                sum += q;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument(std::string(who) + ": row does not sum to 1");
        }
    }
}

inline void check_distribution(const TabularLinearMDP& mdp, const InitialDistribution& xi) {
    if (static_cast<int>(xi.xi1.size()) != mdp.n_states)
        throw std::invalid_argument("xi1: wrong state count");
    double sum = 0.0;
    for (double q : xi.xi1) {
        if (q < 0.0) throw std::invalid_argument("xi1: negative probability");
        sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("xi1: does not sum to 1");
}

/// Transition tensor P_h[s][a][s']. Values within 1e-12 of the [0,1]
/// boundary are clamped; larger violations are left for validate() to report.
inline std::vector<std::vector<std::vector<double>>> transition_kernel(
    const TabularLinearMDP& mdp, int h) {
    mdp.check_stage(h);
    std::vector<std::vector<std::vector<double>>> P(
        mdp.n_states, std::vector<std::vector<double>>(
                          mdp.n_actions, std::vector<double>(mdp.n_states, 0.0)));
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int sp = 0; sp < mdp.n_states; ++sp) {
                double p = dot(mdp.phi[s][a], mdp.mu[h - 1][sp]);
                if (p < 0.0 && p >= -1e-12) p = 0.0;
                if (p > 1.0 && p <= 1.0 + 1e-12) p = 1.0;
                P[s][a][sp] = p;
            }
    return P;
}

/// Target-policy features phi_h^pi(s) = sum_a pi_h(a|s) phi(s,a).
inline std::vector<std::vector<double>> policy_features(const TabularLinearMDP& mdp,
                                                        const Policy& pi, int h) {
    mdp.check_stage(h);
    std::vector<std::vector<double>> out(mdp.n_states, std::vector<double>(mdp.d, 0.0));
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double w = pi.row(h, s)[a];
            if (w == 0.0) continue;
            for (int j = 0; j < mdp.d; ++j) out[s][j] += w * mdp.phi[s][a][j];
        }
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization. nlohmann::json emits shortest round-trip decimal for
// doubles, so finite values survive a save/load cycle bit-exactly.

inline nlohmann::json to_json(const TabularLinearMDP& mdp) {
    nlohmann::json j;
    j["d"] = mdp.d;
    j["H"] = mdp.H;
    j["n_s"] = mdp.n_states;
    j["n_a"] = mdp.n_actions;
    j["phi"] = mdp.phi;
    j["mu"] = mdp.mu;
    j["gamma"] = mdp.gamma;
    j["noise"] = {{"kind", mdp.noise.kind == NoiseKind::none ? "none" : "uniform"},
                  {"half_width", mdp.noise.half_width}};
    return j;
}

inline TabularLinearMDP mdp_from_json(const nlohmann::json& j) {
    TabularLinearMDP mdp;
    try {
        mdp.d = j.at("d").get<int>();
        mdp.H = j.at("H").get<int>();
        mdp.n_states = j.at("n_s").get<int>();
        mdp.n_actions = j.at("n_a").get<int>();
        mdp.phi = j.at("phi").get<std::vector<std::vector<std::vector<double>>>>();
        mdp.mu = j.at("mu").get<std::vector<std::vector<std::vector<double>>>>();
        mdp.gamma = j.at("gamma").get<std::vector<std::vector<double>>>();
        const auto& n = j.at("noise");
        const std::string kind = n.at("kind").get<std::string>();
        if (kind == "none")
            mdp.noise.kind = NoiseKind::none;
        else if (kind == "uniform")
            mdp.noise.kind = NoiseKind::uniform;
        else
            throw ConfigError("mdp: unknown noise kind '" + kind + "'");
        mdp.noise.half_width = n.at("half_width").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mdp document: ") + e.what());
    }
    if (mdp.d < 1 || mdp.H < 1 || mdp.n_states < 1 || mdp.n_actions < 1)
        throw ConfigError("mdp document: d, H, n_s, n_a must all be >= 1");
    if (static_cast<int>(mdp.phi.size()) != mdp.n_states ||
        static_cast<int>(mdp.mu.size()) != mdp.H ||
        static_cast<int>(mdp.gamma.size()) != mdp.H)
        throw ConfigError("mdp document: phi/mu/gamma shapes disagree with d,H,n_s,n_a");
    return mdp;
}

inline void save_mdp(const TabularLinearMDP& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << to_json(mdp).dump(2) << "\n";
}

inline TabularLinearMDP load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mdp document parse: ") + e.what());
    }
    return mdp_from_json(j);
}

} // namespace opelab
