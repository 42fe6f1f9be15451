#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "opelab/errors.hpp"
#include "opelab/exact.hpp"
#include "opelab/mdp.hpp"
#include "opelab/numerics.hpp"
#include "opelab/sampler.hpp"

namespace opelab {

/// Ridge regression data: minimize
///   lambda ||w||^2 + sum_k weights[k] * (<features[k], w> - targets[k])^2.
/// The variance-aware estimator passes weights[k] = 1 / sigma_hat_k^2;
/// unweighted callers pass all ones.
struct RidgeProblem {
    int dim = 0;                               // d; checked against features
    std::vector<std::vector<double>> features; // K x d
    std::vector<double> targets;               // K
    std::vector<double> weights;               // K, all > 0
    double lambda = 1.0;
};

/// Solve the ridge problem through its normal equations
///   (lambda I + sum_k weights[k] phi_k phi_k^T) w = sum_k weights[k] phi_k y_k.
/// With K = 0 only the regularizer remains and the solution is the zero vector.
inline std::vector<double> weighted_ridge(const RidgeProblem& problem) {
    if (!(problem.lambda > 0.0))
        throw std::invalid_argument("weighted_ridge: lambda must be > 0");
    if (problem.dim < 1) throw std::invalid_argument("weighted_ridge: dim must be >= 1");
    const std::size_t K = problem.features.size();
    if (problem.targets.size() != K || problem.weights.size() != K)
        throw std::invalid_argument("weighted_ridge: features/targets/weights sizes disagree");
    if (K == 0) return std::vector<double>(problem.dim, 0.0);
    const int d = problem.dim;
    for (const auto& f : problem.features)
        if (static_cast<int>(f.size()) != d)
            throw std::invalid_argument("weighted_ridge: feature row has wrong dimension");
    SymMatrix gram(d);
    gram.add_diagonal(problem.lambda);
    std::vector<double> rhs(d, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double wk = problem.weights[k];
        if (!(wk > 0.0)) throw std::invalid_argument("weighted_ridge: weights must be > 0");
        gram.add_outer(problem.features[k], wk);
        const double wy = wk * problem.targets[k];
        for (int j = 0; j < d; ++j) rhs[j] += wy * problem.features[k][j];
    }
    return solve_spd(gram, rhs);
}

/// Parameters of the variance-aware estimator. The standard algorithm fixes
/// lambda = 1, eta_h = 1 and sigma_r = 1; eta_schedule overrides eta per
/// stage when nonempty (length H).
struct VaParams {
    double lambda = 1.0;
    double eta = 1.0;
    double sigma_r = 1.0;
    std::vector<double> eta_schedule;

    double eta_at(int h) const {
        return eta_schedule.empty() ? eta : eta_schedule[h - 1];
    }

    void check(int H) const {
        if (!(lambda > 0.0)) throw ConfigError("params: lambda must be > 0");
        if (sigma_r < 0.0 || sigma_r > 1.0) throw ConfigError("params: sigma_r must be in [0,1]");
        if (!eta_schedule.empty() && static_cast<int>(eta_schedule.size()) != H)
            throw ConfigError("params: eta_schedule length must equal H");
        for (int h = 1; h <= H; ++h)
            if (eta_at(h) < 1.0) throw ConfigError("params: eta_h must be >= 1");
    }

    bool operator==(const VaParams&) const = default;
};

/// Everything an estimator run produces: the value estimate plus all fitted
/// per-stage quantities. beta_hat/theta_hat/Sigma_hat are only populated by
/// the variance-aware method.
struct EstimatorOutput {
    std::string method;
    double v1_hat = 0.0;
    double lambda = 1.0;
    std::vector<double> stage_lambdas;               // regularizer actually used per stage
    VaParams params;                                 // meaningful when method == "va_ope"
    std::vector<std::vector<double>> w_hat;          // [h-1] -> R^d
    std::vector<std::vector<double>> beta_hat;       // [h-1] -> R^d
    std::vector<std::vector<double>> theta_hat;      // [h-1] -> R^d
    std::vector<SymMatrix> Lambda_hat;               // per stage
    std::vector<SymMatrix> Sigma_hat;                // per stage (VA only)
    std::vector<std::vector<double>> V_hat;          // [h-1][s]

    bool operator==(const EstimatorOutput&) const = default;
};

namespace detail {

inline void check_data_shape(const OfflineData& data, const TabularLinearMDP& mdp) {
    if (data.H() != mdp.H)
        throw StageMismatch("dataset has H = " + std::to_string(data.H()) +
                            " but the model has H = " + std::to_string(mdp.H));
    for (const auto& stage : data.per_stage)
        if (static_cast<int>(stage.size()) != data.K())
            throw StageMismatch("dataset stages disagree on K");
}

} // namespace detail

/// Fitted Q-iteration baseline with per-stage regularizers: the backward
/// recursion of unweighted ridge regressions
///   w_h = (sum_k phi_k phi_k^T + lambda_h I)^{-1} sum_k phi_k (r_k + V_{h+1}(s'_k))
/// with V_{h+1}(.) = <phi_{h+1}^pi(.), w_{h+1}> and V_{H+1} = 0. No value
/// clipping anywhere.
inline EstimatorOutput fqi_ope(const OfflineData& data, const TabularLinearMDP& mdp,
                               const Policy& target, const InitialDistribution& xi1,
                               const std::vector<double>& stage_lambdas) {
    detail::check_data_shape(data, mdp);
    if (static_cast<int>(stage_lambdas.size()) != mdp.H)
        throw std::invalid_argument("fqi_ope: stage_lambdas length must equal H");
    for (double l : stage_lambdas)
        if (!(l > 0.0)) throw std::invalid_argument("fqi_ope: lambda must be > 0");

    const int H = mdp.H, S = mdp.n_states, d = mdp.d;
    EstimatorOutput out;
    out.method = "fqi_ope";
    out.lambda = stage_lambdas[0];
    out.stage_lambdas = stage_lambdas;
    out.w_hat.assign(H, std::vector<double>(d, 0.0));
    out.V_hat.assign(H, std::vector<double>(S, 0.0));
    out.Lambda_hat.reserve(H);

    std::vector<std::vector<double>> phi_pi_next; // phi_{h+1}^pi, unused at h = H
    std::vector<SymMatrix> grams;
    grams.reserve(H);
    for (int h = H; h >= 1; --h) {
        const auto phi_pi = policy_features(mdp, target, h);
        SymMatrix gram(d);
        gram.add_diagonal(stage_lambdas[h - 1]);
        std::vector<double> rhs(d, 0.0);
        for (const Transition& t : data.per_stage[h - 1]) {
            const auto& f = mdp.phi[t.s][t.a];
            gram.add_outer(f, 1.0);
            const double v_next =
                (h == H) ? 0.0 : dot(phi_pi_next[t.s_next], out.w_hat[h]);
            const double y = t.r + v_next;
            for (int j = 0; j < d; ++j) rhs[j] += f[j] * y;
        }
        out.w_hat[h - 1] = solve_spd(gram, rhs);
        for (int s = 0; s < S; ++s) out.V_hat[h - 1][s] = dot(phi_pi[s], out.w_hat[h - 1]);
        grams.push_back(std::move(gram));
        phi_pi_next = phi_pi;
    }
    // grams were produced back to front
    for (int h = H - 1; h >= 0; --h) out.Lambda_hat.push_back(std::move(grams[h]));
    out.v1_hat = dot(xi1.xi1, out.V_hat[0]);
    return out;
}

inline EstimatorOutput fqi_ope(const OfflineData& data, const TabularLinearMDP& mdp,
                               const Policy& target, const InitialDistribution& xi1,
                               double lambda) {
    return fqi_ope(data, mdp, target, xi1, std::vector<double>(mdp.H, lambda));
}

/// Variance estimate table sigma_hat_h^2(s,a) implied by the fitted (beta,
/// theta) of stage h:
///   VV(s,a)      = clip(<phi, beta>, 0, (H-h+1)^2) - clip(<phi, theta>, 0, H-h+1)^2
///   sigma^2(s,a) = max(eta_h, VV(s,a)) + sigma_r^2.
inline std::vector<std::vector<double>> sigma_hat_sq_table(
    const TabularLinearMDP& mdp, int h, std::span<const double> beta,
    std::span<const double> theta, const VaParams& params) {
    mdp.check_stage(h);
    const double range = static_cast<double>(mdp.H - h + 1);
    const double eta_h = params.eta_at(h);
    std::vector<std::vector<double>> sq(mdp.n_states,
                                        std::vector<double>(mdp.n_actions, 0.0));
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            const auto& f = mdp.phi[s][a];
            const double second = std::clamp(dot(f, beta), 0.0, range * range);
            const double first = std::clamp(dot(f, theta), 0.0, range);
            const double vv = second - first * first;
            sq[s][a] = std::max(eta_h, vv) + params.sigma_r * params.sigma_r;
        }
    return sq;
}

/// Variance-aware off-policy evaluation. Backward over h = H..1:
///   Sigma_h  = sum_k phi_check_k phi_check_k^T + lambda I          (from D-check)
///   beta_h   = Sigma_h^{-1} sum_k phi_check_k V_{h+1}(s'_check_k)^2
///   theta_h  = Sigma_h^{-1} sum_k phi_check_k V_{h+1}(s'_check_k)
///   sigma_h  from sigma_hat_sq_table
///   Lambda_h = sum_k phi_k phi_k^T / sigma_k^2 + lambda I          (from D)
///   w_h      = Lambda_h^{-1} sum_k phi_k (r_k + V_{h+1}(s'_k)) / sigma_k^2
///   V_h(.)   = <phi_h^pi(.), w_h>
/// and finally v1_hat = sum_s xi1(s) V_1(s). Next-stage values are always
/// evaluated through the stage-(h+1) policy features.
inline EstimatorOutput va_ope(const OfflineData& data, const OfflineData& data_check,
                              const TabularLinearMDP& mdp, const Policy& target,
                              const InitialDistribution& xi1, const VaParams& params) {
    detail::check_data_shape(data, mdp);
    detail::check_data_shape(data_check, mdp);
    if (data.H() != data_check.H() || data.K() != data_check.K())
        throw StageMismatch("va_ope: D and D-check disagree on (H, K)");
    params.check(mdp.H);

    const int H = mdp.H, S = mdp.n_states, d = mdp.d;
    const double lambda = params.lambda;
    EstimatorOutput out;
    out.method = "va_ope";
    out.lambda = lambda;
    out.stage_lambdas.assign(H, lambda);
    out.params = params;
    out.w_hat.assign(H, std::vector<double>(d, 0.0));
    out.beta_hat.assign(H, std::vector<double>(d, 0.0));
    out.theta_hat.assign(H, std::vector<double>(d, 0.0));
    out.V_hat.assign(H, std::vector<double>(S, 0.0));

    std::vector<SymMatrix> lambdas_rev, sigmas_rev;
    lambdas_rev.reserve(H);
    sigmas_rev.reserve(H);

    std::vector<std::vector<double>> phi_pi_next;
    for (int h = H; h >= 1; --h) {
        const auto phi_pi = policy_features(mdp, target, h);
        auto v_next = [&](int s_next) {
            return (h == H) ? 0.0 : dot(phi_pi_next[s_next], out.w_hat[h]);
        };

        // Variance regressions on D-check.
        SymMatrix sigma_gram(d);
        sigma_gram.add_diagonal(lambda);
        std::vector<double> rhs_beta(d, 0.0), rhs_theta(d, 0.0);
        for (const Transition& t : data_check.per_stage[h - 1]) {
            const auto& f = mdp.phi[t.s][t.a];
            sigma_gram.add_outer(f, 1.0);
            const double v = v_next(t.s_next);
            for (int j = 0; j < d; ++j) {
                rhs_beta[j] += f[j] * v * v;
                rhs_theta[j] += f[j] * v;
            }
        }
        const Cholesky sigma_chol(sigma_gram);
        out.beta_hat[h - 1] = sigma_chol.solve(rhs_beta);
        out.theta_hat[h - 1] = sigma_chol.solve(rhs_theta);

        const auto sig_sq =
            sigma_hat_sq_table(mdp, h, out.beta_hat[h - 1], out.theta_hat[h - 1], params);

        // Weighted ridge on D.
        SymMatrix weighted_gram(d);
        weighted_gram.add_diagonal(lambda);
        std::vector<double> rhs(d, 0.0);
        for (const Transition& t : data.per_stage[h - 1]) {
            const auto& f = mdp.phi[t.s][t.a];
            const double inv_sq = 1.0 / sig_sq[t.s][t.a];
            weighted_gram.add_outer(f, inv_sq);
            const double y = (t.r + v_next(t.s_next)) * inv_sq;
            for (int j = 0; j < d; ++j) rhs[j] += f[j] * y;
        }
        out.w_hat[h - 1] = solve_spd(weighted_gram, rhs);
        for (int s = 0; s < S; ++s) out.V_hat[h - 1][s] = dot(phi_pi[s], out.w_hat[h - 1]);

        lambdas_rev.push_back(std::move(weighted_gram));
        sigmas_rev.push_back(std::move(sigma_gram));
        phi_pi_next = phi_pi;
    }
    out.Lambda_hat.reserve(H);
    out.Sigma_hat.reserve(H);
    for (int h = H - 1; h >= 0; --h) {
        out.Lambda_hat.push_back(std::move(lambdas_rev[h]));
        out.Sigma_hat.push_back(std::move(sigmas_rev[h]));
    }
    out.v1_hat = dot(xi1.xi1, out.V_hat[0]);
    return out;
}

/// The three terms of the exact error decomposition, per stage:
///   v_1 - v1_hat = sum_h [ value_error + sampling + regularization ] with
///   value_error(h)    = -lambda v_h^T Lambda_h^{-1} sum_s' mu_h(s') (V_{h+1} - V_hat_{h+1})(s')
///   sampling(h)       =  v_h^T Lambda_h^{-1} sum_k phi_k Delta_k / sigma_k^2
///   regularization(h) =  lambda v_h^T Lambda_h^{-1} w_h
/// where Delta_k is the Bellman noise of sample k. The sampling term is
/// reconstructed algebraically from the fitted quantities (no dataset is
/// needed): sum_k phi_k Delta_k / sigma_k^2 = (Lambda_h - lambda I) wt_h -
/// Lambda_h w_hat_h with wt_h = gamma_h + sum_s' mu_h(s') V_hat_{h+1}(s').
struct StageDecomposition {
    double value_error = 0.0;
    double sampling = 0.0;
    double regularization = 0.0;

    double total() const { return value_error + sampling + regularization; }
};

inline std::vector<StageDecomposition> bellman_residual_diagnostic(
    const EstimatorOutput& out, const TabularLinearMDP& mdp, const Policy& target,
    const ExactEval& exact) {
    const int H = mdp.H, S = mdp.n_states, d = mdp.d;
    if (exact.H != H || static_cast<int>(out.w_hat.size()) != H)
        throw StageMismatch("bellman_residual_diagnostic: H mismatch");
    InitialDistribution xi{exact.xi1};
    const auto nu_t = occupancy(mdp, target, xi);

    std::vector<StageDecomposition> terms(H);
    for (int h = 1; h <= H; ++h) {
        const double lambda = out.stage_lambdas[h - 1];
        std::vector<double> v_pi(d, 0.0);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double mass = nu_t[h - 1][s][a];
                if (mass == 0.0) continue;
                for (int j = 0; j < d; ++j) v_pi[j] += mass * mdp.phi[s][a][j];
            }

        const Cholesky chol(out.Lambda_hat[h - 1]);

        // sum_s' mu_h(s') (V_{h+1}^pi - V_hat_{h+1})(s') and the plug-in
        // backup wt_h = gamma_h + sum_s' mu_h(s') V_hat_{h+1}(s').
        std::vector<double> mu_dv(d, 0.0), wt(mdp.gamma[h - 1]);
        for (int sp = 0; sp < S; ++sp) {
            const double v_true = (h == H) ? 0.0 : exact.V[h][sp];
            const double v_est = (h == H) ? 0.0 : out.V_hat[h][sp];
            for (int j = 0; j < d; ++j) {
                mu_dv[j] += mdp.mu[h - 1][sp][j] * (v_true - v_est);
                wt[j] += mdp.mu[h - 1][sp][j] * v_est;
            }
        }

        terms[h - 1].value_error = -lambda * dot(v_pi, chol.solve(mu_dv));
        terms[h - 1].regularization = lambda * dot(v_pi, chol.solve(exact.w[h - 1]));

        std::vector<double> u = out.Lambda_hat[h - 1].matvec(wt);
        for (int j = 0; j < d; ++j) u[j] -= lambda * wt[j];
        terms[h - 1].sampling = dot(v_pi, chol.solve(u)) - dot(v_pi, out.w_hat[h - 1]);
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Debug serialization.

inline nlohmann::json to_json(const EstimatorOutput& out) {
    nlohmann::json j;
    j["method"] = out.method;
    j["v1_hat"] = out.v1_hat;
    j["lambda"] = out.lambda;
    j["w_hat"] = out.w_hat;
    j["V_hat"] = out.V_hat;
    if (out.method == "va_ope") {
        j["beta_hat"] = out.beta_hat;
        j["theta_hat"] = out.theta_hat;
        j["eta"] = out.params.eta;
        j["sigma_r"] = out.params.sigma_r;
    }
    auto mat_rows = [](const SymMatrix& m) {
        std::vector<std::vector<double>> rows(m.dim(), std::vector<double>(m.dim()));
        for (int i = 0; i < m.dim(); ++i)
            for (int k = 0; k < m.dim(); ++k) rows[i][k] = m(i, k);
        return rows;
    };
    auto& lam = j["Lambda_hat"] = nlohmann::json::array();
    for (const auto& m : out.Lambda_hat) lam.push_back(mat_rows(m));
    if (!out.Sigma_hat.empty()) {
        auto& sig = j["Sigma_hat"] = nlohmann::json::array();
        for (const auto& m : out.Sigma_hat) sig.push_back(mat_rows(m));
    }
    return j;
}

} // namespace opelab
