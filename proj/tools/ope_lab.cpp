// ope-lab: command-line driver for the off-policy evaluation laboratory.
//
//   ope-lab generate-mdp --H 10 --p 0.6 [--alpha 0101...] [--scale s] --out mdp.json
//   ope-lab run --config sweep.json [--jobs N]
//   ope-lab dominant-terms --config dt.json
//   ope-lab plot --summary summary.csv --out plots/
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opelab/opelab.hpp"

namespace {

using namespace opelab;

int cmd_generate_mdp(int H, double p, const std::string& alpha_bits, double scale,
                     double noise_half_width, const std::string& out_path) {
    SynthConfig cfg;
    cfg.H = H;
    cfg.p = p;
    cfg.encoding_scale = scale;
    for (char c : alpha_bits) {
        if (c != '0' && c != '1')
            throw ConfigError("generate-mdp: --alpha must be a bitstring of 0s and 1s");
        cfg.alpha.push_back(c - '0');
    }
    if (noise_half_width > 0.0) {
        if (noise_half_width > 1.0)
            throw ConfigError("generate-mdp: --noise must be in [0,1]");
        cfg.noise = {NoiseKind::uniform, noise_half_width};
    }
    const auto inst = build_synth(cfg);
    if (out_path.empty() || out_path == "-") {
        std::cout << to_json(inst.mdp).dump(2) << "\n";
    } else {
        save_mdp(inst.mdp, out_path);
        std::cerr << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_run(const std::string& config_path, int jobs) {
    const SweepConfig cfg = load_sweep_config(config_path);
    std::filesystem::create_directories(cfg.output_dir);
    const std::string records_path = cfg.output_dir + "/records.csv";
    const std::string summary_path = cfg.output_dir + "/summary.csv";

    std::ofstream records_out(records_path);
    if (!records_out) throw Error("cannot open '" + records_path + "' for writing");
    records_out << kRecordsCsvHeader << "\n";
    const auto records = run_sweep(cfg, jobs, [&](const RunRecord& r) {
        records_out << record_csv_line(r) << "\n";
        records_out.flush();
    });

    const auto summary = aggregate(records);
    std::ofstream summary_out(summary_path);
    if (!summary_out) throw Error("cannot open '" + summary_path + "' for writing");
    write_summary_csv(summary, summary_out);

    std::cerr << records.size() << " records -> " << records_path << "\n"
              << summary.size() << " summary rows -> " << summary_path << "\n";
    return 0;
}

int cmd_dominant_terms(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config '" + config_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }

    TabularLinearMDP mdp;
    Policy behavior, target;
    InitialDistribution xi1;
    if (j.contains("instance")) {
        const auto& inst_j = j.at("instance");
        SynthConfig sc;
        sc.H = inst_j.value("H", 5);
        sc.p = inst_j.value("p", 0.6);
        if (inst_j.contains("alpha")) sc.alpha = inst_j.at("alpha").get<std::vector<int>>();
        sc.encoding_scale = inst_j.value("encoding_scale", 1.0);
        auto inst = build_synth(sc);
        mdp = std::move(inst.mdp);
        behavior = std::move(inst.behavior);
        target = std::move(inst.target);
        xi1 = std::move(inst.xi1);
    } else if (j.contains("mdp_file")) {
        mdp = load_mdp(j.at("mdp_file").get<std::string>());
        try {
            behavior.probs =
                j.at("behavior").get<std::vector<std::vector<std::vector<double>>>>();
            target.probs = j.at("target").get<std::vector<std::vector<std::vector<double>>>>();
            xi1.xi1 = j.at("xi1").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("dominant-terms config: with mdp_file, inline "
                                          "'behavior', 'target' and 'xi1' are required: ") +
                              e.what());
        }
    } else {
        throw ConfigError("dominant-terms config: need either 'instance' or 'mdp_file'");
    }

    const long K = j.value("K", 1L);
    const double sigma_r = j.value("sigma_r", 1.0);
    std::vector<double> eta(mdp.H, 1.0);
    if (j.contains("eta")) {
        if (j.at("eta").is_array())
            eta = j.at("eta").get<std::vector<double>>();
        else
            eta.assign(mdp.H, j.at("eta").get<double>());
    }
    const std::string out_path = j.value("out", std::string("dominant_terms.csv"));

    const auto cov = population_covariances(mdp, behavior, target, xi1, eta, sigma_r);
    const auto dt = dominant_terms(cov, K);

    std::ofstream out(out_path);
    if (!out) throw Error("cannot open '" + out_path + "' for writing");
    out << "h,term_va,term_fqi,ratio\n";
    for (int h = 1; h <= mdp.H; ++h)
        out << h << ',' << fmt_double(dt.per_stage_va[h - 1]) << ','
            << fmt_double(dt.per_stage_fqi[h - 1]) << ','
            << fmt_double(dt.per_stage_fqi[h - 1] / dt.per_stage_va[h - 1]) << '\n';
    out << "summary," << fmt_double(dt.d_va) << ',' << fmt_double(dt.d_fqi) << ','
        << fmt_double(dt.ratio) << '\n';
    std::cerr << "d_va=" << fmt_double(dt.d_va) << " d_fqi=" << fmt_double(dt.d_fqi)
              << " ratio=" << fmt_double(dt.ratio) << " -> " << out_path << "\n";
    return 0;
}

int cmd_plot(const std::string& summary_path, const std::string& out_dir) {
    std::ifstream in(summary_path);
    if (!in) throw ConfigError("cannot open summary '" + summary_path + "'");
    const auto rows = read_summary_csv(in);
    if (rows.empty()) throw ConfigError("summary '" + summary_path + "' has no rows");
    const auto paths = emit_plots(rows, out_dir);
    for (const auto& p : paths) std::cerr << "wrote " << p << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"off-policy evaluation laboratory for finite linear MDPs"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate-mdp", "write the synthetic instance as JSON");
    int gen_h = 5;
    double gen_p = 0.6, gen_scale = 1.0, gen_noise = 0.0;
    std::string gen_alpha, gen_out;
    gen->add_option("--H", gen_h, "horizon")->required();
    gen->add_option("--p", gen_p, "distribution-shift parameter in (0,1)")->required();
    gen->add_option("--alpha", gen_alpha, "per-stage transition bits, e.g. 0101");
    gen->add_option("--scale", gen_scale, "scale of the 8 encoding coordinates");
    gen->add_option("--noise", gen_noise, "uniform reward-noise half width in [0,1]");
    gen->add_option("--out", gen_out, "output path ('-' or empty for stdout)");

    auto* run = app.add_subcommand("run", "run a sweep from a JSON config");
    std::string run_config;
    int run_jobs = 1;
    run->add_option("--config", run_config, "sweep config JSON")->required();
    run->add_option("--jobs", run_jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* dt = app.add_subcommand("dominant-terms",
                                  "exact dominant error terms of both methods");
    std::string dt_config;
    dt->add_option("--config", dt_config, "dominant-terms config JSON")->required();

    auto* plot = app.add_subcommand("plot", "render SVG error plots from a summary CSV");
    std::string plot_summary, plot_out = "plots";
    plot->add_option("--summary", plot_summary, "summary CSV from 'run'")->required();
    plot->add_option("--out", plot_out, "output directory for SVG files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_generate_mdp(gen_h, gen_p, gen_alpha, gen_scale,
                                                   gen_noise, gen_out);
        if (run->parsed()) return cmd_run(run_config, run_jobs);
        if (dt->parsed()) return cmd_dominant_terms(dt_config);
        if (plot->parsed()) return cmd_plot(plot_summary, plot_out);
    } catch (const opelab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
