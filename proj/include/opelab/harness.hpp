#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "opelab/errors.hpp"
#include "opelab/estimators.hpp"
#include "opelab/exact.hpp"
#include "opelab/format.hpp"
#include "opelab/sampler.hpp"
#include "opelab/synth.hpp"

namespace opelab {

/// One experiment grid: for every (method, H, p, K, trial) cell, sample an
/// offline dataset under the behavior policy and run the estimator against
/// the exact value. Both methods of a cell share the dataset seed, so they
/// see identical data.
struct SweepConfig {
    SynthConfig instance;            // template; H and p are overridden per cell
    std::vector<long> K_grid;        // sorted ascending
    std::vector<int> H_list;
    std::vector<double> p_list;
    int trials = 1;
    std::uint64_t base_seed = 0;
    std::vector<std::string> methods; // subset of {"va_ope", "fqi_ope"}
    VaParams params;
    SplitMode split_mode = SplitMode::alias;
    SamplingModel sampling_model = SamplingModel::stage_sampling;
    std::string output_dir = ".";
};

struct RunRecord {
    std::string method;
    int H = 0;
    double p = 0.0;
    long K = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    double v_true = 0.0;
    double v_hat = 0.0;
    double abs_error = 0.0;
    long wall_time_ms = 0;
};

inline constexpr const char* kRecordsCsvHeader =
    "method,H,p,K,trial,seed,v_true,v_hat,abs_error,wall_time_ms";

inline SweepConfig sweep_config_from_json(const nlohmann::json& j) {
    SweepConfig cfg;
    auto require = [&](const char* field) -> const nlohmann::json& {
        if (!j.contains(field)) throw ConfigError(std::string("config: missing field '") + field + "'");
        return j.at(field);
    };
    try {
        const auto& inst = require("instance");
        if (inst.contains("alpha")) cfg.instance.alpha = inst.at("alpha").get<std::vector<int>>();
        if (inst.contains("encoding_scale"))
            cfg.instance.encoding_scale = inst.at("encoding_scale").get<double>();
        if (inst.contains("noise")) {
            const auto& n = inst.at("noise");
            const std::string kind = n.at("kind").get<std::string>();
            if (kind == "none")
                cfg.instance.noise.kind = NoiseKind::none;
            else if (kind == "uniform")
                cfg.instance.noise.kind = NoiseKind::uniform;
            else
                throw ConfigError("config: instance.noise.kind must be 'none' or 'uniform'");
            cfg.instance.noise.half_width = n.value("half_width", 0.0);
        }
        cfg.K_grid = require("K_grid").get<std::vector<long>>();
        cfg.H_list = require("H_list").get<std::vector<int>>();
        cfg.p_list = require("p_list").get<std::vector<double>>();
        cfg.trials = require("trials").get<int>();
        cfg.base_seed = require("base_seed").get<std::uint64_t>();
        cfg.methods = require("methods").get<std::vector<std::string>>();
        if (j.contains("params")) {
            const auto& p = j.at("params");
            cfg.params.lambda = p.value("lambda", 1.0);
            cfg.params.sigma_r = p.value("sigma_r", 1.0);
            if (p.contains("eta")) {
                if (p.at("eta").is_array())
                    cfg.params.eta_schedule = p.at("eta").get<std::vector<double>>();
                else
                    cfg.params.eta = p.at("eta").get<double>();
            }
        }
        if (j.contains("split_mode")) {
            const std::string m = j.at("split_mode").get<std::string>();
            if (m == "alias")
                cfg.split_mode = SplitMode::alias;
            else if (m == "halves")
                cfg.split_mode = SplitMode::halves;
            else
                throw ConfigError("config: split_mode must be 'alias' or 'halves'");
        }
        if (j.contains("sampling_model")) {
            const std::string m = j.at("sampling_model").get<std::string>();
            if (m == "stage_sampling")
                cfg.sampling_model = SamplingModel::stage_sampling;
            else if (m == "trajectory")
                cfg.sampling_model = SamplingModel::trajectory;
            else
                throw ConfigError("config: sampling_model must be 'stage_sampling' or 'trajectory'");
        }
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    if (cfg.K_grid.empty()) throw ConfigError("config: K_grid must be nonempty");
    if (!std::is_sorted(cfg.K_grid.begin(), cfg.K_grid.end()))
        throw ConfigError("config: K_grid must be sorted ascending");
    for (long k : cfg.K_grid)
        if (k < 1) throw ConfigError("config: K_grid entries must be >= 1");
    if (cfg.H_list.empty()) throw ConfigError("config: H_list must be nonempty");
    for (int h : cfg.H_list)
        if (h < 1) throw ConfigError("config: H_list entries must be >= 1");
    if (cfg.p_list.empty()) throw ConfigError("config: p_list must be nonempty");
    for (double p : cfg.p_list)
        if (!(p > 0.0 && p < 1.0)) throw ConfigError("config: p_list entries must be in (0,1)");
    if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
    if (cfg.methods.empty()) throw ConfigError("config: methods must be nonempty");
    for (const auto& m : cfg.methods)
        if (m != "va_ope" && m != "fqi_ope")
            throw ConfigError("config: unknown method '" + m + "'");
    return cfg;
}

inline SweepConfig load_sweep_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    return sweep_config_from_json(j);
}

namespace detail {

/// Dataset seed for one cell; deliberately method-independent so both
/// estimators consume identical data.
inline std::uint64_t cell_seed(std::uint64_t base, int H, double p, long K, int trial) {
    return mix_seed({base, static_cast<std::uint64_t>(H), double_bits(p),
                     static_cast<std::uint64_t>(K), static_cast<std::uint64_t>(trial)});
}

struct SweepCell {
    std::string method;
    int H;
    double p;
    long K;
    int trial;
};

} // namespace detail

/// Run the sweep. Trials execute on `jobs` worker threads; records are
/// delivered to `sink` (when given) incrementally in the canonical
/// (method, H, p, K, trial) order and returned in the same order.
/// wall_time_ms is measured and therefore the one field that varies
/// between reruns; every other field is a pure function of the config.
inline std::vector<RunRecord> run_sweep(
    const SweepConfig& cfg, int jobs = 1,
    const std::function<void(const RunRecord&)>& sink = nullptr) {
    if (jobs < 1) throw ConfigError("run_sweep: jobs must be >= 1");

    // Exact values and instances depend only on H (the target policy ignores
    // p, but the behavior policy needs it, so instances are cached per (H,p)).
    std::map<std::pair<int, double>, SynthInstance> instances;
    std::map<int, double> v_true_by_h;
    for (int H : cfg.H_list)
        for (double p : cfg.p_list) {
            SynthConfig ic = cfg.instance;
            ic.H = H;
            ic.p = p;
            if (!cfg.instance.alpha.empty() &&
                static_cast<int>(cfg.instance.alpha.size()) != H)
                throw ConfigError("config: instance.alpha length must equal every H in H_list");
            instances.emplace(std::make_pair(H, p), build_synth(ic));
        }
    for (int H : cfg.H_list) {
        const auto& inst = instances.at({H, cfg.p_list.front()});
        v_true_by_h[H] = exact_eval(inst.mdp, inst.target, inst.xi1).v1;
    }

    std::vector<detail::SweepCell> cells;
    for (const auto& method : cfg.methods)
        for (int H : cfg.H_list)
            for (double p : cfg.p_list)
                for (long K : cfg.K_grid)
                    for (int trial = 0; trial < cfg.trials; ++trial)
                        cells.push_back({method, H, p, K, trial});

    std::vector<RunRecord> records(cells.size());
    std::atomic<std::size_t> next_cell{0};

    // Reorder buffer: workers post finished indices, the flusher emits the
    // contiguous prefix so sinks observe canonical order incrementally.
    std::mutex flush_mutex;
    std::map<std::size_t, const RunRecord*> done;
    std::size_t next_to_flush = 0;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next_cell.fetch_add(1);
            if (i >= cells.size()) return;
            const auto& cell = cells[i];
            const auto& inst = instances.at({cell.H, cell.p});
            const std::uint64_t seed =
                detail::cell_seed(cfg.base_seed, cell.H, cell.p, cell.K, cell.trial);

            const auto t0 = std::chrono::steady_clock::now();
            const OfflineData data =
                cfg.sampling_model == SamplingModel::stage_sampling
                    ? sample_stage(inst.mdp, inst.behavior, inst.xi1,
                                   static_cast<int>(cell.K), seed)
                    : sample_trajectories(inst.mdp, inst.behavior, inst.xi1,
                                          static_cast<int>(cell.K), seed);
            double v_hat = 0.0;
            if (cell.method == "va_ope") {
                const auto [d_fit, d_check] = split(data, cfg.split_mode);
                v_hat = va_ope(d_fit, d_check, inst.mdp, inst.target, inst.xi1, cfg.params)
                            .v1_hat;
            } else {
                auto [d_fit, d_check] = split(data, cfg.split_mode);
                (void)d_check;
                v_hat = fqi_ope(d_fit, inst.mdp, inst.target, inst.xi1, cfg.params.lambda)
                            .v1_hat;
            }
            const auto t1 = std::chrono::steady_clock::now();

            RunRecord rec;
            rec.method = cell.method;
            rec.H = cell.H;
            rec.p = cell.p;
            rec.K = cell.K;
            rec.trial = cell.trial;
            rec.seed = seed;
            rec.v_true = v_true_by_h.at(cell.H);
            rec.v_hat = v_hat;
            rec.abs_error = std::abs(rec.v_true - rec.v_hat);
            rec.wall_time_ms =
                std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
            records[i] = std::move(rec);

            std::lock_guard<std::mutex> lock(flush_mutex);
            done[i] = &records[i];
            while (!done.empty() && done.begin()->first == next_to_flush) {
                if (sink) sink(*done.begin()->second);
                done.erase(done.begin());
                ++next_to_flush;
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return records;
}

/// Per-(method,H,p,K) aggregate with [10%, 90%] bands over trials.
struct SummaryRow {
    std::string method;
    int H = 0;
    double p = 0.0;
    long K = 0;
    double mean_abs_error = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    int trials = 0;
};

/// Quantile with linear interpolation between closest ranks on a sorted
/// sample: position q*(n-1), interpolated between the flanking order stats.
inline double quantile_linear(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile_linear: empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    std::map<std::tuple<std::string, int, double, long>, std::vector<double>> groups;
    for (const auto& r : records)
        groups[{r.method, r.H, r.p, r.K}].push_back(r.abs_error);
    std::vector<SummaryRow> rows;
    rows.reserve(groups.size());
    for (auto& [key, errs] : groups) {
        std::sort(errs.begin(), errs.end());
        SummaryRow row;
        row.method = std::get<0>(key);
        row.H = std::get<1>(key);
        row.p = std::get<2>(key);
        row.K = std::get<3>(key);
        double sum = 0.0;
        for (double e : errs) sum += e;
        row.mean_abs_error = sum / static_cast<double>(errs.size());
        row.q10 = quantile_linear(errs, 0.10);
        row.q90 = quantile_linear(errs, 0.90);
        row.trials = static_cast<int>(errs.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV emission and parsing.

inline void write_records_csv(const std::vector<RunRecord>& records, std::ostream& out) {
    out << kRecordsCsvHeader << "\n";
    for (const auto& r : records)
        out << r.method << ',' << r.H << ',' << fmt_double(r.p) << ',' << r.K << ','
            << r.trial << ',' << r.seed << ',' << fmt_double(r.v_true) << ','
            << fmt_double(r.v_hat) << ',' << fmt_double(r.abs_error) << ','
            << r.wall_time_ms << '\n';
}

inline std::string record_csv_line(const RunRecord& r) {
    std::ostringstream out;
    out << r.method << ',' << r.H << ',' << fmt_double(r.p) << ',' << r.K << ',' << r.trial
        << ',' << r.seed << ',' << fmt_double(r.v_true) << ',' << fmt_double(r.v_hat) << ','
        << fmt_double(r.abs_error) << ',' << r.wall_time_ms;
    return out.str();
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
    out << "method,H,p,K,mean_abs_error,q10,q90,trials\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.H << ',' << fmt_double(r.p) << ',' << r.K << ','
            << fmt_double(r.mean_abs_error) << ',' << fmt_double(r.q10) << ','
            << fmt_double(r.q90) << ',' << r.trials << '\n';
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& in) {
    std::vector<SummaryRow> rows;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("summary csv: empty file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        auto next = [&] {
            if (!std::getline(row, field, ',')) throw ConfigError("summary csv: short row");
            return field;
        };
        SummaryRow r;
        r.method = next();
        r.H = std::stoi(next());
        r.p = parse_double(next());
        r.K = std::stol(next());
        r.mean_abs_error = parse_double(next());
        r.q10 = parse_double(next());
        r.q90 = parse_double(next());
        r.trials = std::stoi(next());
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace opelab
