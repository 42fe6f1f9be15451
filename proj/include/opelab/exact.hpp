#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "opelab/mdp.hpp"
#include "opelab/numerics.hpp"

namespace opelab {

/// Ground-truth policy evaluation computed by exact backward recursion over
/// the finite model: Q_h, V_h, the weight vectors w_h with Q_h = <phi, w_h>,
/// the value v_1 = E_{xi1}[V_1], conditional next-value variances, and the
/// policy features phi_h^pi. Expected rewards are used (noise is zero-mean).
struct ExactEval {
    int H = 0;
    std::vector<std::vector<double>> w;                  // [h-1] -> R^d
    std::vector<std::vector<std::vector<double>>> Q;     // [h-1][s][a]
    std::vector<std::vector<double>> V;                  // [h-1][s]
    double v1 = 0.0;
    std::vector<std::vector<std::vector<double>>> var;   // [h-1][s][a]
    std::vector<std::vector<std::vector<double>>> phi_pi; // [h-1][s] -> R^d
    std::vector<double> xi1;                             // retained input
};

inline ExactEval exact_eval(const TabularLinearMDP& mdp, const Policy& pi,
                            const InitialDistribution& xi1) {
    check_policy(mdp, pi);
    check_distribution(mdp, xi1);
    const int H = mdp.H, S = mdp.n_states, A = mdp.n_actions, d = mdp.d;
    ExactEval ev;
    ev.H = H;
    ev.xi1 = xi1.xi1;
    ev.w.assign(H, std::vector<double>(d, 0.0));
    ev.Q.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));
    ev.V.assign(H, std::vector<double>(S, 0.0));
    ev.var.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));
    ev.phi_pi.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(d, 0.0)));

    std::vector<double> v_next(S, 0.0); // V_{h+1}, zero at h = H
    for (int h = H; h >= 1; --h) {
        const auto P = transition_kernel(mdp, h);
        // w_h = gamma_h + sum_{s'} mu_h(s') V_{h+1}(s')
        for (int j = 0; j < d; ++j) {
            double acc = mdp.gamma[h - 1][j];
            for (int sp = 0; sp < S; ++sp) acc += mdp.mu[h - 1][sp][j] * v_next[sp];
            ev.w[h - 1][j] = acc;
        }
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                double pv = 0.0, pv2 = 0.0;
                for (int sp = 0; sp < S; ++sp) {
                    pv += P[s][a][sp] * v_next[sp];
                    pv2 += P[s][a][sp] * v_next[sp] * v_next[sp];
                }
                ev.Q[h - 1][s][a] = mdp.mean_reward(h, s, a) + pv;
                ev.var[h - 1][s][a] = pv2 - pv * pv;
            }
            double vs = 0.0;
            for (int a = 0; a < A; ++a) vs += pi.row(h, s)[a] * ev.Q[h - 1][s][a];
            ev.V[h - 1][s] = vs;
        }
        ev.phi_pi[h - 1] = policy_features(mdp, pi, h);
        v_next = ev.V[h - 1];
    }
    ev.v1 = dot(xi1.xi1, ev.V[0]);
    return ev;
}

/// Occupancy measures nu_h(s,a) induced by (xi1, pi, P): the distribution of
/// the stage-h state-action pair. Forward recursion; each table sums to 1.
inline std::vector<std::vector<std::vector<double>>> occupancy(
    const TabularLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi1) {
    check_policy(mdp, pi);
    check_distribution(mdp, xi1);
    const int H = mdp.H, S = mdp.n_states, A = mdp.n_actions;
    std::vector<std::vector<std::vector<double>>> nu(
        H, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));

    std::vector<double> state_marginal = xi1.xi1;
    for (int h = 1; h <= H; ++h) {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) nu[h - 1][s][a] = state_marginal[s] * pi.row(h, s)[a];
        if (h == H) break;
        const auto P = transition_kernel(mdp, h);
        std::vector<double> next(S, 0.0);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double mass = nu[h - 1][s][a];
                if (mass == 0.0) continue;
                for (int sp = 0; sp < S; ++sp) next[sp] += mass * P[s][a][sp];
            }
        state_marginal = std::move(next);
    }
    return nu;
}

/// Orthonormal basis of span{phi(s,a)} by modified Gram-Schmidt. The basis
/// has full length d for models whose features span R^d; rank-deficient
/// feature sets (the standard synthetic instance spans only 9 of its 10
/// coordinates) get a shorter basis.
inline std::vector<std::vector<double>> feature_span_basis(const TabularLinearMDP& mdp) {
    std::vector<std::vector<double>> basis;
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            std::vector<double> v = mdp.phi[s][a];
            const double norm0 = std::sqrt(dot(v, v));
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& b : basis) {
                    const double c = dot(b, v);
                    for (int j = 0; j < mdp.d; ++j) v[j] -= c * b[j];
                }
            const double norm = std::sqrt(dot(v, v));
            if (norm > 1e-10 * (1.0 + norm0)) {
                for (double& x : v) x /= norm;
                basis.push_back(std::move(v));
                if (static_cast<int>(basis.size()) == mdp.d) return basis;
            }
        }
    return basis;
}

/// Population quantities of the evaluation problem: the behavior covariance
/// Sigma_h = E_nu[phi phi^T], the variance-weighted covariance
/// Lambda_h = E_nu[phi phi^T / sigma_h^2] with
/// sigma_h(s,a)^2 = max{eta_h, Var of next target value} + sigma_r^2,
/// the mean target features v_h^pi, and the coverage spectra kappa, iota.
///
/// Coverage constants are taken on the feature span: when the model's
/// features only span an r < d dimensional subspace, the ambient lambda_min
/// is identically zero no matter how well the behavior policy covers the
/// actions, so kappa_h/iota_h are the minimum eigenvalues of Sigma_h and
/// Lambda_h restricted to span{phi(s,a)} (equal to the ambient values when
/// r = d). The ambient spectrum stays visible via ambient_kappa_h.
struct PopulationCovariances {
    int H = 0;
    std::vector<SymMatrix> Sigma;
    std::vector<SymMatrix> Lambda;
    std::vector<std::vector<double>> v_pi;   // [h-1] -> R^d
    std::vector<double> kappa_h;             // lambda_min(Sigma_h) on the span
    std::vector<double> iota_h;              // lambda_min(Lambda_h) on the span
    double kappa = 0.0;
    double iota = 0.0;
    std::vector<double> ambient_kappa_h;     // lambda_min(Sigma_h) in R^d
    std::vector<std::vector<double>> span_basis; // r orthonormal vectors in R^d
    int span_rank = 0;
    std::vector<SymMatrix> Sigma_span;       // r x r restrictions
    std::vector<SymMatrix> Lambda_span;
    std::vector<std::vector<double>> v_pi_span; // [h-1] -> R^r
    std::vector<double> eta;                 // per-stage eta_h used
    double sigma_r = 0.0;
};

namespace detail {

inline SymMatrix restrict_to_span(const SymMatrix& m,
                                  const std::vector<std::vector<double>>& basis) {
    const int r = static_cast<int>(basis.size());
    SymMatrix out(r);
    for (int i = 0; i < r; ++i) {
        const auto mb = m.matvec(basis[i]);
        for (int j = i; j < r; ++j) out.set(i, j, dot(basis[j], mb));
    }
    return out;
}

} // namespace detail

inline PopulationCovariances population_covariances(
    const TabularLinearMDP& mdp, const Policy& behavior, const Policy& target,
    const InitialDistribution& xi1, const std::vector<double>& eta, double sigma_r) {
    const int H = mdp.H, S = mdp.n_states, A = mdp.n_actions, d = mdp.d;
    if (static_cast<int>(eta.size()) != H)
        throw std::invalid_argument("population_covariances: eta must have length H");
    for (double e : eta)
        if (!(e > 0.0)) throw std::invalid_argument("population_covariances: eta_h must be > 0");
    if (sigma_r < 0.0 || sigma_r > 1.0)
        throw std::invalid_argument("population_covariances: sigma_r must be in [0,1]");

    const auto nu_b = occupancy(mdp, behavior, xi1);
    const auto nu_t = occupancy(mdp, target, xi1);
    const ExactEval target_eval = exact_eval(mdp, target, xi1);

    PopulationCovariances cov;
    cov.H = H;
    cov.eta = eta;
    cov.sigma_r = sigma_r;
    cov.span_basis = feature_span_basis(mdp);
    cov.span_rank = static_cast<int>(cov.span_basis.size());
    cov.Sigma.reserve(H);
    cov.Lambda.reserve(H);
    cov.v_pi.assign(H, std::vector<double>(d, 0.0));
    cov.kappa_h.resize(H);
    cov.iota_h.resize(H);
    cov.ambient_kappa_h.resize(H);
    cov.v_pi_span.assign(H, std::vector<double>(cov.span_rank, 0.0));

    for (int h = 1; h <= H; ++h) {
        SymMatrix sigma(d), lambda(d);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const auto& f = mdp.phi[s][a];
                const double mass_b = nu_b[h - 1][s][a];
                if (mass_b > 0.0) {
                    sigma.add_outer(f, mass_b);
                    const double sig2 =
                        std::max(eta[h - 1], target_eval.var[h - 1][s][a]) + sigma_r * sigma_r;
                    lambda.add_outer(f, mass_b / sig2);
                }
                const double mass_t = nu_t[h - 1][s][a];
                if (mass_t > 0.0)
                    for (int j = 0; j < d; ++j) cov.v_pi[h - 1][j] += mass_t * f[j];
            }
        cov.ambient_kappa_h[h - 1] = sym_eig_extremes(sigma).lambda_min;
        SymMatrix sigma_r_mat = detail::restrict_to_span(sigma, cov.span_basis);
        SymMatrix lambda_r_mat = detail::restrict_to_span(lambda, cov.span_basis);
        cov.kappa_h[h - 1] = sym_eig_extremes(sigma_r_mat).lambda_min;
        cov.iota_h[h - 1] = sym_eig_extremes(lambda_r_mat).lambda_min;
        for (int i = 0; i < cov.span_rank; ++i)
            cov.v_pi_span[h - 1][i] = dot(cov.span_basis[i], cov.v_pi[h - 1]);
        cov.Sigma.push_back(std::move(sigma));
        cov.Lambda.push_back(std::move(lambda));
        cov.Sigma_span.push_back(std::move(sigma_r_mat));
        cov.Lambda_span.push_back(std::move(lambda_r_mat));
    }
    cov.kappa = *std::min_element(cov.kappa_h.begin(), cov.kappa_h.end());
    cov.iota = *std::min_element(cov.iota_h.begin(), cov.iota_h.end());
    if (cov.kappa <= 1e-12)
        throw DegenerateCoverage("behavior coverage has lambda_min = " +
                                 std::to_string(cov.kappa) +
                                 " on the feature span; the offline data cannot identify "
                                 "all represented directions");
    return cov;
}

/// Convenience overload broadcasting a scalar eta to every stage.
inline PopulationCovariances population_covariances(
    const TabularLinearMDP& mdp, const Policy& behavior, const Policy& target,
    const InitialDistribution& xi1, double eta, double sigma_r) {
    return population_covariances(mdp, behavior, target, xi1,
                                  std::vector<double>(mdp.H, eta), sigma_r);
}

} // namespace opelab
