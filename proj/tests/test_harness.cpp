#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "opelab/harness.hpp"
#include "opelab/plot.hpp"

using namespace opelab;

namespace {

nlohmann::json minimal_config() {
    return nlohmann::json{
        {"instance", {{"noise", {{"kind", "uniform"}, {"half_width", 1.0}}}}},
        {"K_grid", {64, 128}},
        {"H_list", {3}},
        {"p_list", {0.6}},
        {"trials", 4},
        {"base_seed", 9},
        {"methods", {"va_ope", "fqi_ope"}},
    };
}

std::string records_csv_without_timing(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        const std::string line = record_csv_line(r);
        out << line.substr(0, line.rfind(',')) << "\n";
    }
    return out.str();
}

} // namespace

TEST_CASE("sweep config parsing and validation") {
    const auto cfg = sweep_config_from_json(minimal_config());
    CHECK(cfg.K_grid == std::vector<long>{64, 128});
    CHECK(cfg.trials == 4);
    CHECK(cfg.params.lambda == 1.0);
    CHECK(cfg.split_mode == SplitMode::alias);
    CHECK(cfg.sampling_model == SamplingModel::stage_sampling);
    CHECK(cfg.instance.noise.kind == NoiseKind::uniform);

    auto check_rejects = [](nlohmann::json j, const std::string& needle) {
        try {
            sweep_config_from_json(j);
            FAIL("expected ConfigError for " + needle);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    auto j = minimal_config();
    j.erase("K_grid");
    check_rejects(j, "K_grid");
    j = minimal_config();
    j["K_grid"] = {128, 64};
    check_rejects(j, "sorted");
    j = minimal_config();
    j["trials"] = 0;
    check_rejects(j, "trials");
    j = minimal_config();
    j["methods"] = nlohmann::json::array();
    check_rejects(j, "methods");
    j = minimal_config();
    j["methods"] = {"gradient_descent"};
    check_rejects(j, "method");
    j = minimal_config();
    j["p_list"] = {1.5};
    check_rejects(j, "p_list");
}

TEST_CASE("run_sweep produces paired records in canonical order") {
    auto j = minimal_config();
    j["trials"] = 2;
    j["K_grid"] = {64};
    const auto cfg = sweep_config_from_json(j);
    const auto records = run_sweep(cfg);
    REQUIRE(records.size() == 4); // 2 methods x 1 cell x 2 trials

    // canonical order: va_ope first (config order), trials inner
    CHECK(records[0].method == "va_ope");
    CHECK(records[1].method == "va_ope");
    CHECK(records[2].method == "fqi_ope");
    CHECK(records[3].method == "fqi_ope");

    // paired seeds: same trial -> same dataset seed for both methods
    CHECK(records[0].seed == records[2].seed);
    CHECK(records[1].seed == records[3].seed);
    CHECK(records[0].seed != records[1].seed);

    for (const auto& r : records) {
        CHECK(r.v_true == Catch::Approx(1.5).margin(1e-12)); // H/2 for H = 3
        CHECK(r.abs_error == std::abs(r.v_true - r.v_hat));
    }
}

TEST_CASE("run_sweep is deterministic modulo wall time, for any job count") {
    const auto cfg = sweep_config_from_json(minimal_config());
    std::vector<RunRecord> sink_order;
    const auto a = run_sweep(cfg, 1);
    const auto b = run_sweep(cfg, 4, [&](const RunRecord& r) { sink_order.push_back(r); });
    CHECK(records_csv_without_timing(a) == records_csv_without_timing(b));
    // the sink observes the canonical order even with 4 workers
    CHECK(records_csv_without_timing(sink_order) == records_csv_without_timing(b));

    std::ostringstream sum_a, sum_b;
    write_summary_csv(aggregate(a), sum_a);
    write_summary_csv(aggregate(b), sum_b);
    CHECK(sum_a.str() == sum_b.str());
}

TEST_CASE("records csv schema") {
    CHECK(std::string(kRecordsCsvHeader) ==
          "method,H,p,K,trial,seed,v_true,v_hat,abs_error,wall_time_ms");
    RunRecord r;
    r.method = "va_ope";
    r.H = 3;
    r.p = 0.6;
    r.K = 64;
    r.trial = 1;
    r.seed = 77;
    r.v_true = 1.5;
    r.v_hat = 1.25;
    r.abs_error = 0.25;
    r.wall_time_ms = 12;
    CHECK(record_csv_line(r) == "va_ope,3,0.6,64,1,77,1.5,1.25,0.25,12");
}

TEST_CASE("aggregate") {
    SECTION("single record collapses to itself") {
        RunRecord r;
        r.method = "fqi_ope";
        r.H = 2;
        r.p = 0.5;
        r.K = 32;
        r.abs_error = 0.125;
        const auto rows = aggregate({r});
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].mean_abs_error == 0.125);
        CHECK(rows[0].q10 == 0.125);
        CHECK(rows[0].q90 == 0.125);
        CHECK(rows[0].trials == 1);
    }

    SECTION("errors 1..10 give mean 5.5, q10 = 1.9, q90 = 9.1") {
        std::vector<RunRecord> records;
        for (int i = 1; i <= 10; ++i) {
            RunRecord r;
            r.method = "va_ope";
            r.H = 1;
            r.p = 0.5;
            r.K = 8;
            r.trial = i;
            r.abs_error = static_cast<double>(i);
            records.push_back(r);
        }
        const auto rows = aggregate(records);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].mean_abs_error == Catch::Approx(5.5).epsilon(1e-15));
        CHECK(rows[0].q10 == Catch::Approx(1.9).epsilon(1e-12));
        CHECK(rows[0].q90 == Catch::Approx(9.1).epsilon(1e-12));
    }

    SECTION("permutation invariant") {
        auto j = minimal_config();
        const auto records = run_sweep(sweep_config_from_json(j));
        auto shuffled = records;
        std::reverse(shuffled.begin(), shuffled.end());
        std::ostringstream a, b;
        write_summary_csv(aggregate(records), a);
        write_summary_csv(aggregate(shuffled), b);
        CHECK(a.str() == b.str());
    }
}

TEST_CASE("summary csv round-trips") {
    const auto records = run_sweep(sweep_config_from_json(minimal_config()));
    const auto rows = aggregate(records);
    std::ostringstream out;
    write_summary_csv(rows, out);
    std::istringstream in(out.str());
    const auto parsed = read_summary_csv(in);
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].method == rows[i].method);
        CHECK(parsed[i].K == rows[i].K);
        CHECK(parsed[i].mean_abs_error == rows[i].mean_abs_error);
        CHECK(parsed[i].q10 == rows[i].q10);
        CHECK(parsed[i].q90 == rows[i].q90);
    }
}

TEST_CASE("svg plots") {
    // Hand-built two-method summary with strictly decreasing means.
    std::vector<SummaryRow> rows;
    for (const char* m : {"va_ope", "fqi_ope"}) {
        double err = (m == std::string("va_ope")) ? 0.4 : 0.8;
        for (long K : {64L, 256L, 1024L, 4096L}) {
            SummaryRow r;
            r.method = m;
            r.H = 5;
            r.p = 0.6;
            r.K = K;
            r.mean_abs_error = err;
            r.q10 = err * 0.5;
            r.q90 = err * 1.5;
            r.trials = 10;
            rows.push_back(r);
            err /= 2.0;
        }
    }
    const std::string svg = render_error_plot(rows, 5, 0.6);

    SECTION("structure: one polyline and one band per method") {
        std::size_t polylines = 0, bands = 0, pos = 0;
        while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
            ++polylines;
            ++pos;
        }
        pos = 0;
        while ((pos = svg.find("class=\"band\"", pos)) != std::string::npos) {
            ++bands;
            ++pos;
        }
        CHECK(polylines == 2);
        CHECK(bands == 2);
        CHECK(svg.find("xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
        CHECK(svg.find("version=\"1.1\"") != std::string::npos);
        CHECK(svg.find("sqrt(K)") != std::string::npos);
        CHECK(svg.find("log10 OPE error") != std::string::npos);
        CHECK(svg.find("va_ope") != std::string::npos);
        CHECK(svg.find("fqi_ope") != std::string::npos);
    }

    SECTION("decreasing error series renders with strictly increasing pixel y") {
        // pixel y grows downward, so smaller errors sit at larger y values
        const std::regex poly_re("<polyline points=\"([^\"]*)\"");
        auto it = std::sregex_iterator(svg.begin(), svg.end(), poly_re);
        REQUIRE(it != std::sregex_iterator());
        for (; it != std::sregex_iterator(); ++it) {
            std::istringstream pts((*it)[1]);
            std::string pair;
            std::vector<double> ys;
            while (pts >> pair) {
                const auto comma = pair.find(',');
                ys.push_back(std::stod(pair.substr(comma + 1)));
            }
            REQUIRE(ys.size() == 4);
            for (std::size_t i = 1; i < ys.size(); ++i) CHECK(ys[i] > ys[i - 1]);
        }
    }

    SECTION("emit_plots writes one file per (H,p) panel") {
        auto more = rows;
        for (auto r : rows) {
            r.H = 10;
            more.push_back(r);
        }
        const auto dir =
            (std::filesystem::temp_directory_path() / "opelab_plots").string();
        std::filesystem::remove_all(dir);
        const auto paths = emit_plots(more, dir);
        REQUIRE(paths.size() == 2);
        for (const auto& p : paths) {
            CHECK(std::filesystem::exists(p));
            CHECK(p.find(".svg") != std::string::npos);
        }
        std::filesystem::remove_all(dir);
    }
}
