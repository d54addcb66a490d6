#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fetosim/harness/run.hpp"
#include "fetosim/stream/server.hpp"

namespace {

using namespace fetosim;

struct Common {
    std::string scenario;
    bool deterministic = false;
    int substeps = 0;
    double frame_rate = 0.0;

    void add(CLI::App* app)
    {
        app->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
        app->add_flag("--deterministic", deterministic, "Force deterministic mode");
        app->add_option("--substeps", substeps, "Override substeps per frame")->check(CLI::PositiveNumber);
        app->add_option("--frame-rate", frame_rate, "Override frame rate, Hz")->check(CLI::PositiveNumber);
    }

    Scenario load(const std::string& output = {}) const
    {
        Scenario s = load_scenario(scenario);
        RunOverrides o;
        if (deterministic) {
            o.deterministic = true;
        }
        if (substeps > 0) {
            o.substeps = substeps;
        }
        if (frame_rate > 0.0) {
            o.frame_rate = frame_rate;
        }
        if (!output.empty()) {
            o.output = output;
        }
        o.apply(s);
        return s;
    }
};

void print_summary(const MetricsReport& r)
{
    std::cout << "scenario " << r.scenario << ": " << r.rows.size() << " frames";
    if (!r.rows.empty()) {
        const auto& last = r.rows.back();
        std::cout << ", volume ratio " << last.volume_ratio << ", residual " << last.elastic_residual;
        std::ostringstream h;
        h << std::hex << last.position_hash;
        std::cout << ", hash " << h.str();
    }
    std::cout << ", components " << r.components << ", cuts " << r.cuts << ", removed mass " << r.removed_mass
              << " kg\n";
    if (r.failure) {
        std::cout << "aborted at frame " << r.failure->frame << ": " << r.failure->message << '\n';
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Soft-tissue XPBD simulator"};
    app.require_subcommand(1);

    Common run_opts;
    std::string run_output;
    auto* run = app.add_subcommand("run", "Run a scenario and write per-frame metrics");
    run_opts.add(run);
    run->add_option("-o,--output", run_output, "Metrics CSV path (defaults to the scenario's output)");

    Common bench_opts;
    std::vector<std::size_t> sizes{5000, 40000};
    int frames = 120;
    auto* bench = app.add_subcommand("bench", "Measure substep rate at several element counts");
    bench_opts.add(bench);
    bench->add_option("--sizes", sizes, "Element counts")->delimiter(',');
    bench->add_option("--frames", frames, "Timed frames per size")->check(CLI::PositiveNumber);

    Common verify_opts;
    std::string golden;
    bool write_golden = false;
    auto* verify = app.add_subcommand("verify", "Run a scenario and compare against a golden metrics file");
    verify_opts.add(verify);
    verify->add_option("--golden", golden, "Golden metrics CSV")->required();
    verify->add_flag("--write-golden", write_golden, "Write the run as the new golden instead of comparing");

    Common serve_opts;
    int port = 8765;
    double snapshot_rate = 30.0;
    auto* serve = app.add_subcommand("serve", "Serve an interactive session over WebSocket");
    serve_opts.add(serve);
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
    serve->add_option("--snapshot-rate", snapshot_rate, "Snapshot rate, Hz")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const Scenario s = run_opts.load(run_output);
            const MetricsReport r = run_scenario(s);
            if (!s.output.empty()) {
                write_metrics_csv(s.output, r);
                std::cout << "metrics written to " << s.output.string() << '\n';
            } else {
                write_metrics_csv(std::cout, r);
            }
            print_summary(r);
            return r.ok() ? EXIT_SUCCESS : EXIT_FAILURE;
        }
        if (*bench) {
            const Scenario s = bench_opts.load();
            write_benchmark_table(std::cout, benchmark(s, sizes, frames));
            return EXIT_SUCCESS;
        }
        if (*verify) {
            const Scenario s = verify_opts.load();
            const MetricsReport r = run_scenario(s);
            print_summary(r);
            if (write_golden) {
                write_metrics_csv(golden, r);
                std::cout << "golden written to " << golden << '\n';
                return r.ok() ? EXIT_SUCCESS : EXIT_FAILURE;
            }
            const GoldenDiff d =
                compare_golden(r, std::filesystem::path(golden), GoldenTolerances::defaults(s.config.solver.deterministic));
            std::cout << (d.pass ? "PASS " : "FAIL ") << d.message << '\n';
            return d.pass && r.ok() ? EXIT_SUCCESS : EXIT_FAILURE;
        }
        if (*serve) {
            const Scenario s = serve_opts.load();
            ServerOptions opts;
            opts.port = static_cast<unsigned short>(port);
            opts.snapshot_rate = snapshot_rate;
            serve_session(s, opts);
            return EXIT_SUCCESS;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return EXIT_FAILURE;
    }
    return EXIT_FAILURE;
}
