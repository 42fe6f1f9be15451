#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "opelab/errors.hpp"
#include "opelab/exact.hpp"
#include "opelab/format.hpp"
#include "opelab/mdp.hpp"
#include "opelab/rng.hpp"

namespace opelab {

struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;

    bool operator==(const Transition&) const = default;
};

enum class SamplingModel { stage_sampling, trajectory };

inline std::string to_string(SamplingModel m) {
    return m == SamplingModel::stage_sampling ? "stage_sampling" : "trajectory";
}

/// Offline dataset: K transitions per stage. In the trajectory model the
/// k-th transition of stage h chains into the k-th transition of stage h+1.
struct OfflineData {
    std::vector<std::vector<Transition>> per_stage; // [h-1][k]
    std::uint64_t seed = 0;
    SamplingModel model = SamplingModel::stage_sampling;

    int H() const { return static_cast<int>(per_stage.size()); }
    int K() const { return per_stage.empty() ? 0 : static_cast<int>(per_stage[0].size()); }

    bool operator==(const OfflineData&) const = default;
};

namespace detail {

constexpr std::uint64_t kStageTag = 0x5741A6E5ull;
constexpr std::uint64_t kTrajTag = 0x7247A11Eull;

inline double realized_reward(double mean, const NoiseSpec& noise, RngStream& rng) {
    double r = mean;
    if (noise.kind == NoiseKind::uniform && noise.half_width > 0.0)
        r += rng.uniform(-noise.half_width, noise.half_width);
    return std::clamp(r, 0.0, 1.0);
}

} // namespace detail

/// Stage-sampling model: for each stage h independently, draw (s,a) from the
/// exact occupancy nu_h, then s' from P_h(.|s,a) and a realized reward.
/// Each stage owns its own RNG stream, so the result is a pure function of
/// (mdp, behavior, xi1, K, seed) no matter how calls are scheduled.
inline OfflineData sample_stage(const TabularLinearMDP& mdp, const Policy& behavior,
                                const InitialDistribution& xi1, int K,
                                std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("sample_stage: K must be >= 1");
    check_policy(mdp, behavior, "behavior policy");
    check_distribution(mdp, xi1);
    const int S = mdp.n_states, A = mdp.n_actions;
    const auto nu = occupancy(mdp, behavior, xi1);

    OfflineData data;
    data.seed = seed;
    data.model = SamplingModel::stage_sampling;
    data.per_stage.assign(mdp.H, {});

    std::vector<double> flat(static_cast<std::size_t>(S) * A);
    for (int h = 1; h <= mdp.H; ++h) {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) flat[static_cast<std::size_t>(s) * A + a] = nu[h - 1][s][a];
        const auto P = transition_kernel(mdp, h);
        RngStream rng(mix_seed({seed, detail::kStageTag, static_cast<std::uint64_t>(h)}));
        auto& stage = data.per_stage[h - 1];
        stage.reserve(K);
        for (int k = 0; k < K; ++k) {
            const int cell = rng.categorical(flat);
            const int s = cell / A, a = cell % A;
            const int sp = rng.categorical(P[s][a]);
            const double r = detail::realized_reward(mdp.mean_reward(h, s, a), mdp.noise, rng);
            stage.push_back({s, a, r, sp});
        }
    }
    return data;
}

/// Trajectory model: K independent behavior-policy rollouts of length H.
/// s_next at stage h equals s at stage h+1 within each rollout.
inline OfflineData sample_trajectories(const TabularLinearMDP& mdp, const Policy& behavior,
                                       const InitialDistribution& xi1, int K,
                                       std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("sample_trajectories: K must be >= 1");
    check_policy(mdp, behavior, "behavior policy");
    check_distribution(mdp, xi1);
    OfflineData data;
    data.seed = seed;
    data.model = SamplingModel::trajectory;
    data.per_stage.assign(mdp.H, std::vector<Transition>(K));

    std::vector<std::vector<std::vector<std::vector<double>>>> P;
    P.reserve(mdp.H);
    for (int h = 1; h <= mdp.H; ++h) P.push_back(transition_kernel(mdp, h));

    for (int k = 0; k < K; ++k) {
        RngStream rng(mix_seed({seed, detail::kTrajTag, static_cast<std::uint64_t>(k)}));
        int s = rng.categorical(xi1.xi1);
        for (int h = 1; h <= mdp.H; ++h) {
            const int a = rng.categorical(behavior.row(h, s));
            const int sp = rng.categorical(P[h - 1][s][a]);
            const double r = detail::realized_reward(mdp.mean_reward(h, s, a), mdp.noise, rng);
            data.per_stage[h - 1][k] = {s, a, r, sp};
            s = sp;
        }
    }
    return data;
}

enum class SplitMode { alias, halves };

inline std::string to_string(SplitMode m) {
    return m == SplitMode::alias ? "alias" : "halves";
}

/// Split into the estimation dataset D and the variance dataset D-check.
/// alias returns two copies of the same transitions (the usual practice:
/// no data is wasted); halves returns disjoint K/2 datasets per stage.
inline std::pair<OfflineData, OfflineData> split(const OfflineData& data, SplitMode mode) {
    if (mode == SplitMode::alias) return {data, data};
    const int K = data.K();
    if (K % 2 != 0)
        throw OddK("split: halves mode needs even K, got " + std::to_string(K));
    OfflineData first = data, second = data;
    for (int h = 0; h < data.H(); ++h) {
        const auto& src = data.per_stage[h];
        first.per_stage[h].assign(src.begin(), src.begin() + K / 2);
        second.per_stage[h].assign(src.begin() + K / 2, src.end());
    }
    return {first, second};
}

// ---------------------------------------------------------------------------
// Dataset dump: CSV with columns (h,k,s,a,r,s_next) plus a JSON sidecar
// carrying {seed, model, K, H}.

inline void write_dataset_csv(const OfflineData& data, const std::string& csv_path,
                              const std::string& sidecar_path) {
    std::ofstream out(csv_path);
    if (!out) throw Error("cannot open '" + csv_path + "' for writing");
    out << "h,k,s,a,r,s_next\n";
    for (int h = 1; h <= data.H(); ++h)
        for (int k = 0; k < data.K(); ++k) {
            const Transition& t = data.per_stage[h - 1][k];
            out << h << ',' << k << ',' << t.s << ',' << t.a << ',' << fmt_double(t.r)
                << ',' << t.s_next << '\n';
        }
    nlohmann::json meta = {{"seed", data.seed},
                           {"model", to_string(data.model)},
                           {"K", data.K()},
                           {"H", data.H()}};
    std::ofstream side(sidecar_path);
    if (!side) throw Error("cannot open '" + sidecar_path + "' for writing");
    side << meta.dump(2) << "\n";
}

inline OfflineData read_dataset_csv(const std::string& csv_path,
                                    const std::string& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side) throw Error("cannot open '" + sidecar_path + "' for reading");
    nlohmann::json meta;
    side >> meta;
    OfflineData data;
    data.seed = meta.at("seed").get<std::uint64_t>();
    const std::string model = meta.at("model").get<std::string>();
    if (model == "stage_sampling")
        data.model = SamplingModel::stage_sampling;
    else if (model == "trajectory")
        data.model = SamplingModel::trajectory;
    else
        throw ConfigError("dataset sidecar: unknown model '" + model + "'");
    const int K = meta.at("K").get<int>();
    const int H = meta.at("H").get<int>();
    data.per_stage.assign(H, std::vector<Transition>(K));

    std::ifstream in(csv_path);
    if (!in) throw Error("cannot open '" + csv_path + "' for reading");
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        auto next = [&] {
            if (!std::getline(row, field, ',')) throw Error("dataset csv: short row");
            return field;
        };
        const int h = std::stoi(next());
        const int k = std::stoi(next());
        Transition t;
        t.s = std::stoi(next());
        t.a = std::stoi(next());
        t.r = parse_double(next());
        t.s_next = std::stoi(next());
        if (h < 1 || h > H || k < 0 || k >= K) throw Error("dataset csv: index out of range");
        data.per_stage[h - 1][k] = t;
    }
    return data;
}

} // namespace opelab
