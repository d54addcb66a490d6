#pragma once

#include <functional>
#include <iosfwd>
#include <optional>

#include "fetosim/harness/metrics.hpp"
#include "fetosim/harness/scenario.hpp"

namespace fetosim {

/// Command-line overrides applied on top of a scenario file.
struct RunOverrides {
    std::optional<bool> deterministic;
    std::optional<int> substeps;
    std::optional<double> frame_rate;  // Hz
    std::optional<std::filesystem::path> output;

    void apply(Scenario& scenario) const;
};

using FrameObserver = std::function<void(const Simulation&, const FrameTelemetry&)>;

/// Steps `sim` for the scenario duration, feeding trajectory samples as
/// frame targets. A SolverAbort ends the run with a failure record and
/// the rows recorded so far.
MetricsReport run_scenario(Simulation& sim, const Scenario& scenario, const FrameObserver& observer = {});
MetricsReport run_scenario(const Scenario& scenario, const FrameObserver& observer = {});

struct BenchmarkRow {
    std::size_t requested = 0;
    std::size_t elements = 0;
    std::size_t vertices = 0;
    std::int64_t substeps = 0;
    double seconds = 0.0;
    double rate_hz = 0.0;  // substeps per wall second
    double mean_contacts = 0.0;
};

/// Regenerates the scenario's slab at each element count (keeping its
/// physical size, tools and obstacles), runs `warmup` untimed frames and
/// then `frames` timed frames with the tools held at their initial poses.
std::vector<BenchmarkRow> benchmark(const Scenario& scenario, const std::vector<std::size_t>& sizes,
                                    int frames = 120, int warmup = 30);
void write_benchmark_table(std::ostream& out, const std::vector<BenchmarkRow>& rows);

}  // namespace fetosim
