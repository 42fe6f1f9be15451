#pragma once

// Test-only oracles, independent of the library's solve paths:
//  - gauss_solve: dense Gaussian elimination with partial pivoting
//  - rollout_return_stats: Monte Carlo estimate of v_1^pi with its stderr
//  - random_valid_mdp: anchor-mixture linear MDPs that satisfy the model
//    invariants by construction
//  - random_spd: B^T B + eps I matrices for solver property tests

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "opelab/exact.hpp"
#include "opelab/mdp.hpp"
#include "opelab/rng.hpp"

namespace oracles {

/// Gaussian elimination with partial pivoting on a dense system.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (a[pivot][col] == 0.0) throw std::runtime_error("gauss_solve: singular");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

struct ReturnStats {
    double mean = 0.0;
    double stderr_mean = 0.0;
};

/// Mean episodic return over n rollouts of pi from xi1, with realized
/// (noisy, truncated) rewards, plus the standard error of the mean.
inline ReturnStats rollout_return_stats(const opelab::TabularLinearMDP& mdp,
                                        const opelab::Policy& pi,
                                        const opelab::InitialDistribution& xi1, long n,
                                        std::uint64_t seed) {
    std::vector<std::vector<std::vector<std::vector<double>>>> P;
    for (int h = 1; h <= mdp.H; ++h) P.push_back(opelab::transition_kernel(mdp, h));
    double sum = 0.0, sum_sq = 0.0;
    for (long k = 0; k < n; ++k) {
        opelab::RngStream rng(opelab::mix_seed({seed, 0x0A11ull, static_cast<std::uint64_t>(k)}));
        int s = rng.categorical(xi1.xi1);
        double ret = 0.0;
        for (int h = 1; h <= mdp.H; ++h) {
            const int a = rng.categorical(pi.row(h, s));
            double r = mdp.mean_reward(h, s, a);
            if (mdp.noise.kind == opelab::NoiseKind::uniform && mdp.noise.half_width > 0.0)
                r += rng.uniform(-mdp.noise.half_width, mdp.noise.half_width);
            if (r < 0.0) r = 0.0;
            if (r > 1.0) r = 1.0;
            ret += r;
            s = rng.categorical(P[h - 1][s][a]);
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    ReturnStats st;
    st.mean = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - st.mean * st.mean;
    st.stderr_mean = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    return st;
}

/// Random point on the probability simplex of dimension n.
inline std::vector<double> random_simplex_point(opelab::RngStream& rng, int n) {
    std::vector<double> v(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        v[i] = -std::log(1.0 - rng.next_double()); // Exp(1)
        sum += v[i];
    }
    for (double& x : v) x /= sum;
    return v;
}

struct RandomMdp {
    opelab::TabularLinearMDP mdp;
    opelab::Policy behavior;
    opelab::Policy target;
    opelab::InitialDistribution xi1;
};

/// Anchor-mixture construction: phi(s,a) lies on the simplex, mu_h stacks d
/// anchor next-state distributions, gamma_h holds anchor rewards in
/// [0, 1/sqrt(d)]. Transition rows are convex mixtures, so every invariant
/// of the linear-MDP model holds by construction, and with
/// n_states * n_actions >= d random features the coverage kappa is positive.
inline RandomMdp random_valid_mdp(std::uint64_t seed, int n_states, int n_actions, int d,
                                  int H, opelab::NoiseSpec noise = {}) {
    opelab::RngStream rng(opelab::mix_seed({seed, 0x3A2Dull}));
    RandomMdp out;
    auto& mdp = out.mdp;
    mdp.d = d;
    mdp.H = H;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.noise = noise;

    mdp.phi.assign(n_states, std::vector<std::vector<double>>(n_actions));
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) mdp.phi[s][a] = random_simplex_point(rng, d);

    mdp.mu.assign(H, std::vector<std::vector<double>>(n_states, std::vector<double>(d)));
    mdp.gamma.assign(H, std::vector<double>(d));
    const double reward_cap = 1.0 / std::sqrt(static_cast<double>(d));
    for (int h = 0; h < H; ++h) {
        for (int j = 0; j < d; ++j) {
            const auto anchor = random_simplex_point(rng, n_states);
            for (int sp = 0; sp < n_states; ++sp) mdp.mu[h][sp][j] = anchor[sp];
            mdp.gamma[h][j] = reward_cap * rng.next_double();
        }
    }

    // Random stochastic behavior policy with full support; random
    // deterministic target policy.
    out.behavior.probs.assign(H, std::vector<std::vector<double>>(n_states));
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < n_states; ++s)
            out.behavior.probs[h][s] = random_simplex_point(rng, n_actions);
    out.target = opelab::Policy::deterministic(H, n_states, n_actions, [&](int, int) {
        return static_cast<int>(rng.next_u64() % n_actions);
    });
    out.xi1.xi1 = random_simplex_point(rng, n_states);
    return out;
}

inline opelab::SymMatrix random_spd(opelab::RngStream& rng, int d, double eps = 1e-3) {
    opelab::SymMatrix a(d);
    for (int r = 0; r < d + 2; ++r) {
        std::vector<double> row(d);
        for (double& x : row) x = rng.uniform(-1.0, 1.0);
        a.add_outer(row, 1.0);
    }
    a.add_diagonal(eps);
    return a;
}

} // namespace oracles
