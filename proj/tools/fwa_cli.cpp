// fwa-kit command line: benchmarks, model summaries / forward smoke runs,
// and the DReLu-vs-SoftMax heatmap demo.

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fwa/backbone.hpp"
#include "fwa/bench.hpp"
#include "fwa/heatmap.hpp"
#include "fwa/rng.hpp"

namespace {

void print_records(const std::vector<fwa::BenchRecord>& records) {
    std::cout << std::left << std::setw(18) << "scenario" << std::setw(12) << "mechanism"
              << std::setw(18) << "shape" << std::setw(8) << "repeat" << std::setw(12)
              << "med_ms" << std::setw(12) << "p90_ms" << "peak_bytes\n";
    for (const auto& r : records)
        std::cout << std::left << std::setw(18) << r.scenario << std::setw(12) << r.mechanism
                  << std::setw(18) << r.shape << std::setw(8) << r.repeat << std::setw(12)
                  << std::fixed << std::setprecision(3) << r.wall_ms_med << std::setw(12)
                  << r.wall_ms_p90 << r.peak_bytes << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fast Window Attention toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint32_t seed = 42;
    std::string out_dir = ".";
    bool json_out = false;
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--json", json_out, "print JSON instead of tables");

    // bench
    auto* bench = app.add_subcommand("bench", "run a benchmark scenario");
    std::string scenario;
    bench->add_option("scenario", scenario, "attention-repeat | fawa-vs-pool | complexity")
        ->required();
    bool paper_scale = false;
    std::int64_t base = 640;
    int iters = 9, warmup = 2;
    bench->add_flag("--paper-scale", paper_scale, "use the [128,96,32,32] input");
    bench->add_option("--base", base, "base resolution for fawa-vs-pool");
    bench->add_option("--iters", iters, "timed iterations per record (>= 5)");
    bench->add_option("--warmup", warmup, "warmup iterations (>= 2)");

    // heatmap-demo
    auto* heat = app.add_subcommand("heatmap-demo", "DReLu vs SoftMax attention weight images");
    std::int64_t query_row = -1, query_col = -1;
    float noise = 0.05f;
    heat->add_option("--query-row", query_row, "query pixel row (default: center)");
    heat->add_option("--query-col", query_col, "query pixel column (default: center)");
    heat->add_option("--noise", noise, "uniform noise amplitude");

    // model
    auto* model = app.add_subcommand("model", "model summary or forward smoke run");
    std::string variant = "S";
    std::string action = "summary";
    std::int64_t size = 224;
    model->add_option("--variant", variant, "S or X")->check(CLI::IsMember({"S", "X"}));
    model->add_option("action", action, "summary | infer")
        ->check(CLI::IsMember({"summary", "infer"}));
    model->add_option("--size", size, "input resolution for infer (divisible by 32)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        std::filesystem::create_directories(out_dir);

        if (*bench) {
            fwa::BenchPlan plan;
            plan.seed = seed;
            plan.paper_scale = paper_scale;
            plan.base = base;
            plan.iters = iters;
            plan.warmup = warmup;

            std::vector<fwa::BenchRecord> records;
            nlohmann::json extra;
            std::string name;
            if (scenario == "attention-repeat") {
                name = "attention_repeat";
                records = fwa::run_attention_repeat(plan);
            } else if (scenario == "fawa-vs-pool") {
                name = "fawa_vs_pool";
                records = fwa::run_fawa_vs_pool(plan);
            } else if (scenario == "complexity") {
                name = "complexity_sweep";
                fwa::ComplexityResult res = fwa::run_complexity_sweep(plan);
                records = res.records;
                extra["wall_exponent_mhsa"] = res.wall_exponent_mhsa;
                extra["wall_exponent_fwa"] = res.wall_exponent_fwa;
                extra["mac_exponent_mhsa"] = res.mac_exponent_mhsa;
                extra["mac_exponent_fwa"] = res.mac_exponent_fwa;
            } else {
                std::cerr << "unknown scenario: " << scenario << '\n';
                return 2;
            }
            fwa::write_outputs(records, out_dir, name, extra);
            if (json_out)
                std::cout << fwa::records_json(records).dump(2) << '\n';
            else
                print_records(records);
            if (!extra.empty()) std::cout << extra.dump(2) << '\n';
            return 0;
        }

        if (*heat) {
            fwa::HeatmapOptions opt;
            opt.seed = seed;
            opt.out_dir = out_dir;
            opt.noise = noise;
            opt.query_row = query_row;
            opt.query_col = query_col;
            try {
                fwa::HeatmapResult res = fwa::run_heatmap_demo(opt);
                for (const auto& f : res.files) std::cout << out_dir << '/' << f << '\n';
            } catch (const std::runtime_error& e) {
                std::cerr << "heatmap demo I/O error: " << e.what() << '\n';
                return 3;
            }
            return 0;
        }

        if (*model) {
            const fwa::Variant v = variant == "X" ? fwa::Variant::X : fwa::Variant::S;
            fwa::Model mdl = fwa::build_model(v, seed);
            if (action == "summary") {
                std::cout << fwa::model_summary(mdl).dump(2) << '\n';
                return 0;
            }
            if (size % 32 != 0) {
                std::cerr << "--size must be divisible by 32, got " << size << '\n';
                return 2;
            }
            fwa::Rng rng(seed);
            fwa::Tensor input = fwa::random_uniform({1, 3, size, size}, rng);
            const auto t0 = std::chrono::steady_clock::now();
            fwa::Tensor out = fwa::model_forward(mdl, input);
            const auto t1 = std::chrono::steady_clock::now();

            float mn = out[0], mx = out[0];
            double mean = 0.0;
            for (std::int64_t i = 0; i < out.numel(); ++i) {
                mn = std::min(mn, out[i]);
                mx = std::max(mx, out[i]);
                mean += out[i];
            }
            mean /= static_cast<double>(out.numel());

            nlohmann::json j;
            j["variant"] = variant;
            j["output_shape"] = out.shape();
            j["min"] = mn;
            j["max"] = mx;
            j["mean"] = mean;
            j["finite"] = out.all_finite();
            j["wall_ms"] = std::chrono::duration<double, std::milli>(t1 - t0).count();
            std::cout << j.dump(2) << '\n';
            return 0;
        }
    } catch (const fwa::ShapeError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
