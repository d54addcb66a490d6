#include "fetosim/harness/run.hpp"

#include <chrono>
#include <iomanip>
#include <ostream>

#include "fetosim/tools.hpp"

namespace fetosim {

void RunOverrides::apply(Scenario& scenario) const
{
    auto& solver = scenario.config.solver;
    if (deterministic) {
        solver.deterministic = *deterministic;
    }
    if (substeps) {
        solver.substeps = *substeps;
    }
    if (frame_rate) {
        if (!(*frame_rate > 0.0)) {
            throw ValidationError("frame rate must be positive");
        }
        solver.frame_dt = 1.0 / *frame_rate;
    }
    if (output) {
        scenario.output = *output;
    }
    solver.validate();
}

MetricsReport run_scenario(Simulation& sim, const Scenario& scenario, const FrameObserver& observer)
{
    MetricsReport report;
    report.scenario = scenario.name;
    report.deterministic = scenario.config.solver.deterministic;
    report.initial_mass = sim.initial_mass();

    const std::int64_t frames = scenario.frame_count();
    const double dt = scenario.config.solver.frame_dt;
    for (std::int64_t f = 1; f <= frames; ++f) {
        const double t = static_cast<double>(f) * dt;
        for (const auto& [id, keys] : scenario.trajectory.tracks()) {
            sim.set_tool_target(id, scenario.trajectory.sample(id, t));
        }
        try {
            const FrameTelemetry tel = sim.step_frame();
            report.rows.push_back(MetricsRow::from(tel));
            report.cuts += tel.cuts;
            report.rejected_cuts += tel.rejected_cuts;
            if (observer) {
                observer(sim, tel);
            }
        } catch (const SolverAbort& e) {
            report.failure = FailureRecord{f, e.vertex(), e.what()};
            break;
        }
    }

    report.components = alive_components(sim.mesh());
    report.topology_version = sim.topology_version();
    report.alive_mass = sim.alive_mass();
    report.removed_mass = sim.removed_mass();
    return report;
}

MetricsReport run_scenario(const Scenario& scenario, const FrameObserver& observer)
{
    Simulation sim = make_simulation(scenario);
    return run_scenario(sim, scenario, observer);
}

std::vector<BenchmarkRow> benchmark(const Scenario& scenario, const std::vector<std::size_t>& sizes, int frames,
                                    int warmup)
{
    if (!scenario.slab) {
        throw ValidationError("benchmark requires a slab scenario");
    }
    using clock = std::chrono::steady_clock;
    std::vector<BenchmarkRow> rows;
    for (std::size_t size : sizes) {
        Scenario s = scenario;
        s.slab->cells = slab_cells_for(s.slab->size, size);
        s.trajectory = {};
        Simulation sim = make_simulation(s);

        BenchmarkRow row;
        row.requested = size;
        row.elements = sim.mesh().tet_count();
        row.vertices = sim.mesh().vertex_count();
        for (int f = 0; f < warmup; ++f) {
            sim.step_frame();
        }
        std::int64_t contacts = 0;
        const auto t0 = clock::now();
        for (int f = 0; f < frames; ++f) {
            contacts += sim.step_frame().contact_count;
        }
        row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        row.substeps = static_cast<std::int64_t>(frames) * s.config.solver.substeps;
        row.rate_hz = row.seconds > 0.0 ? static_cast<double>(row.substeps) / row.seconds : 0.0;
        row.mean_contacts = frames > 0 ? static_cast<double>(contacts) / frames : 0.0;
        rows.push_back(row);
    }
    return rows;
}

void write_benchmark_table(std::ostream& out, const std::vector<BenchmarkRow>& rows)
{
    out << "requested,elements,vertices,substeps,seconds,substep_rate_hz,mean_contacts\n";
    for (const auto& r : rows) {
        out << r.requested << ',' << r.elements << ',' << r.vertices << ',' << r.substeps << ',' << std::setprecision(6)
            << r.seconds << ',' << std::fixed << std::setprecision(1) << r.rate_hz << ',' << r.mean_contacts
            << std::defaultfloat << '\n';
    }
}

}  // namespace fetosim
