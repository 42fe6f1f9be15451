#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "opelab/errors.hpp"
#include "opelab/exact.hpp"
#include "opelab/mdp.hpp"
#include "opelab/numerics.hpp"
#include "opelab/rng.hpp"

namespace opelab {

/// Leading 1/sqrt(K) error-bound terms of the two estimators:
///   d_va  = sum_h ||v_h^pi||_{Lambda_h^{-1}} / sqrt(K)
///   d_fqi = sum_h (H-h+1) ||v_h^pi||_{Sigma_h^{-1}} / sqrt(K)
/// and their ratio d_fqi / d_va, the variance-aware coverage advantage.
/// The inverse norms are evaluated on the feature span (v_h^pi always lies
/// in it), so rank-deficient feature sets get their exact pseudo-inverse
/// norms rather than an error or an arbitrary ridge.
struct DominantTerms {
    double d_va = 0.0;
    double d_fqi = 0.0;
    double ratio = 0.0;
    std::vector<double> per_stage_va;
    std::vector<double> per_stage_fqi;
};

inline DominantTerms dominant_terms(const PopulationCovariances& cov, long K) {
    if (K < 1) throw std::invalid_argument("dominant_terms: K must be >= 1");
    if (cov.kappa <= 0.0 || cov.iota <= 0.0)
        throw DegenerateCoverage("dominant_terms: kappa and iota must be positive");
    const int H = cov.H;
    const double root_k = std::sqrt(static_cast<double>(K));
    DominantTerms terms;
    terms.per_stage_va.resize(H);
    terms.per_stage_fqi.resize(H);
    for (int h = 1; h <= H; ++h) {
        const auto& v = cov.v_pi_span[h - 1];
        terms.per_stage_va[h - 1] =
            std::sqrt(inv_quad_form(cov.Lambda_span[h - 1], v)) / root_k;
        terms.per_stage_fqi[h - 1] =
            (H - h + 1) * std::sqrt(inv_quad_form(cov.Sigma_span[h - 1], v)) / root_k;
        terms.d_va += terms.per_stage_va[h - 1];
        terms.d_fqi += terms.per_stage_fqi[h - 1];
    }
    terms.ratio = terms.d_fqi / terms.d_va;
    return terms;
}

/// Numeric evaluation of the error-bound constant bundle:
///   C_{h,1} = (H-h+1) / iota_h
///   C_{h,2} = (H-h+1) sqrt(C_{h,3} / iota_h)
///   C_{h,3} = (H-h+1)^2 / (eta_h + sigma_r^2)
///   C_{h,4} = sqrt(||Lambda_h|| * ||Lambda_h^{-1}||)
///   C_3     = max{ max_h C_{h,3} C_{h,2}^2 / (8 iota_h^2),
///                  H^4 / kappa^2,
///                  H^2/kappa^2 * max_h(C_{h,3}/2) * max_h(C_{h,3}/iota_h) }
///   K_min   : smallest K with K >= C_threshold C_3 d^2 log(d H^2 K/(kappa delta))^2
///   C_4     = sum_h sqrt(C_{h,4} C_{h,2} (H-h+1) d log(d H^2 K_min/(kappa delta))
///                        / (4 iota_h)) * ||v_h^pi||_{Lambda_h^{-1}}
/// The universal constants are unspecified upstream; they are reported as
/// C_threshold = C_bound = 1, so everything here is an envelope meant for
/// relative comparisons only. C_4's log factor is evaluated at K = K_min.
struct BoundConstants {
    int H = 0;
    int d = 0;
    double delta = 0.0;
    std::vector<double> C1, C2, C3_stage, C4_stage;
    double C3 = 0.0;
    double C4 = 0.0;
    double K_min = 0.0;
    double C_threshold = 1.0;
    double C_bound = 1.0;
};

inline BoundConstants bound_constants(const PopulationCovariances& cov, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("bound_constants: delta must be in (0,1)");
    if (cov.kappa <= 0.0 || cov.iota <= 0.0)
        throw DegenerateCoverage("bound_constants: kappa and iota must be positive");
    const int H = cov.H;
    const int d = cov.Sigma[0].dim();

    BoundConstants bc;
    bc.H = H;
    bc.d = d;
    bc.delta = delta;
    bc.C1.resize(H);
    bc.C2.resize(H);
    bc.C3_stage.resize(H);
    bc.C4_stage.resize(H);

    double max_c3_over_2 = 0.0, max_c3_over_iota = 0.0, max_first = 0.0;
    for (int h = 1; h <= H; ++h) {
        const double steps = static_cast<double>(H - h + 1);
        const double iota_h = cov.iota_h[h - 1];
        const double denom = cov.eta[h - 1] + cov.sigma_r * cov.sigma_r;
        bc.C3_stage[h - 1] = steps * steps / denom;
        bc.C1[h - 1] = steps / iota_h;
        bc.C2[h - 1] = steps * std::sqrt(bc.C3_stage[h - 1] / iota_h);
        const auto ext = sym_eig_extremes(cov.Lambda_span[h - 1]);
        bc.C4_stage[h - 1] = std::sqrt(ext.lambda_max / ext.lambda_min);

        max_first = std::max(max_first, bc.C3_stage[h - 1] * bc.C2[h - 1] * bc.C2[h - 1] /
                                            (8.0 * iota_h * iota_h));
        max_c3_over_2 = std::max(max_c3_over_2, bc.C3_stage[h - 1] / 2.0);
        max_c3_over_iota = std::max(max_c3_over_iota, bc.C3_stage[h - 1] / iota_h);
    }
    const double H2 = static_cast<double>(H) * H;
    const double kappa2 = cov.kappa * cov.kappa;
    bc.C3 = std::max({max_first, H2 * H2 / kappa2,
                      H2 / kappa2 * max_c3_over_2 * max_c3_over_iota});

    // Fixed point of K = C_threshold C_3 d^2 log(d H^2 K / (kappa delta))^2.
    const double scale = d * H2 / (cov.kappa * delta);
    double k = std::max(2.0, bc.C_threshold * bc.C3 * d * d);
    for (int it = 0; it < 200; ++it) {
        const double lg = std::log(std::max(scale * k, std::exp(1.0)));
        const double next = std::max(1.0, bc.C_threshold * bc.C3 * d * d * lg * lg);
        if (std::abs(next - k) <= 1e-9 * std::max(1.0, k)) {
            k = next;
            break;
        }
        k = next;
    }
    bc.K_min = k;

    const double log_factor = std::log(std::max(scale * bc.K_min, std::exp(1.0)));
    for (int h = 1; h <= H; ++h) {
        const double steps = static_cast<double>(H - h + 1);
        const double norm =
            std::sqrt(inv_quad_form(cov.Lambda_span[h - 1], cov.v_pi_span[h - 1]));
        bc.C4 += std::sqrt(bc.C4_stage[h - 1] * bc.C2[h - 1] * steps * d * log_factor /
                           (4.0 * cov.iota_h[h - 1])) *
                 norm;
    }
    return bc;
}

/// Empirical mean of phi(s_h, a_h) over n_traj target-policy rollouts; the
/// sampling counterpart of the exact v_h^pi. One RNG stream per trajectory.
inline std::vector<std::vector<double>> monte_carlo_v_features(
    const TabularLinearMDP& mdp, const Policy& target, const InitialDistribution& xi1,
    long n_traj, std::uint64_t seed) {
    if (n_traj < 1) throw std::invalid_argument("monte_carlo_v_features: n_traj must be >= 1");
    const int H = mdp.H, d = mdp.d;
    std::vector<std::vector<std::vector<std::vector<double>>>> P;
    P.reserve(H);
    for (int h = 1; h <= H; ++h) P.push_back(transition_kernel(mdp, h));

    std::vector<std::vector<double>> mean(H, std::vector<double>(d, 0.0));
    constexpr std::uint64_t kTag = 0xFEA72E5ull;
    for (long k = 0; k < n_traj; ++k) {
        RngStream rng(mix_seed({seed, kTag, static_cast<std::uint64_t>(k)}));
        int s = rng.categorical(xi1.xi1);
        for (int h = 1; h <= H; ++h) {
            const int a = rng.categorical(target.row(h, s));
            const auto& f = mdp.phi[s][a];
            for (int j = 0; j < d; ++j) mean[h - 1][j] += f[j];
            s = rng.categorical(P[h - 1][s][a]);
        }
    }
    for (auto& row : mean)
        for (double& x : row) x /= static_cast<double>(n_traj);
    return mean;
}

} // namespace opelab
