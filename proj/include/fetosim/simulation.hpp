#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "fetosim/collision/bvh.hpp"
#include "fetosim/mesh.hpp"
#include "fetosim/solver.hpp"
#include "fetosim/tools.hpp"

namespace fetosim {

struct SimulationConfig {
    MaterialParams material;
    SolverConfig solver;
    ToolGeometry geometry;
    DiathermyConfig diathermy;
    CutConfig cut;
    GraspConfig grasp;
};

struct ToolTelemetry {
    int id = -1;
    Vec3 force = Vec3::Zero();  // force on the tool, N
    int contacts = 0;
    int attachments = 0;
};

struct FrameTelemetry {
    std::int64_t frame = 0;
    double time = 0.0;
    double mean_substep_seconds = 0.0;
    double elastic_residual = 0.0;
    double volume = 0.0;
    double volume_ratio = 1.0;
    double kinetic_energy = 0.0;
    int contact_count = 0;
    int degenerate = 0;
    double removed_mass = 0.0;
    int cuts = 0;
    int rejected_cuts = 0;
    std::uint64_t position_hash = 0;
    std::vector<ToolTelemetry> tools;
};

/// Owns a tissue mesh, its XPBD state and the instruments acting on it.
/// Each frame runs `substeps` substeps; tool poses are interpolated from
/// the previous frame's pose to the current target, collisions are
/// re-detected every substep and tool mutations happen between substeps.
class Simulation {
public:
    struct Tool {
        int id = -1;
        ToolPose pose;    // pose at the last completed substep
        ToolPose target;  // pose to reach at the end of the next frame
        bool armed = false;  // scissors opened while active
        bool collide = true;
        GraspState grasp;
        ToolTelemetry telemetry;
    };

    Simulation(TetMesh mesh, SimulationConfig config);

    /// Registers an instrument; its pose is also its first target. A tool
    /// with collide = false only acts through its events.
    void add_tool(int id, const ToolPose& pose, bool collide = true);
    /// Static world geometry (e.g. a support surface) that contacts the
    /// tissue with friction but is not an instrument.
    void add_obstacle(const SdfShape& shape);
    bool has_tool(int id) const { return tools_.contains(id); }
    void set_tool_target(int id, const ToolPose& target);
    void set_tool_kind(int id, ToolKind kind);

    FrameTelemetry step_frame();

    /// Changes gravity from the next substep on; reset() restores the
    /// configured value.
    void set_gravity(const Vec3& g) { solver_.set_gravity(g); }

    /// Restores the initial mesh, state, tools and counters.
    void reset();

    const TetMesh& mesh() const { return mesh_; }
    const SolverState& state() const { return state_; }
    SolverState& state() { return state_; }
    const Solver& solver() const { return solver_; }
    Solver& solver() { return solver_; }
    const SimulationConfig& config() const { return config_; }
    const CoagulationState& coagulation() const { return coagulation_; }
    const std::map<int, Tool>& tools() const { return tools_; }
    const std::vector<SdfShape>& obstacles() const { return obstacles_; }

    std::int64_t frame() const { return frame_; }
    double time() const { return time_; }
    std::uint32_t topology_version() const { return topology_version_; }
    double initial_mass() const { return initial_mass_; }
    double removed_mass() const { return removed_mass_; }
    double alive_mass() const;
    double rest_volume() const { return mesh_.alive_rest_volume(); }
    const std::vector<CutResult>& cut_log() const { return cut_log_; }

private:
    void rebuild_topology();
    void detect(const SolverState& state, std::vector<Contact>& contacts, std::vector<ContactBody>& bodies);
    void apply_tool_events(Tool& tool, const ToolPose& pose, FrameTelemetry& telemetry);

    TetMesh initial_mesh_;
    std::map<int, Tool> initial_tools_;

    SimulationConfig config_;
    TetMesh mesh_;
    SolverState state_;
    Solver solver_;
    CoagulationState coagulation_;
    std::map<int, Tool> tools_;
    std::vector<SdfShape> obstacles_;

    std::vector<CollisionElement> elements_;
    std::vector<std::vector<int>> vertex_triangles_;
    Bvh bvh_;

    // Per-substep tool sampling used by the contact detector.
    std::vector<std::pair<int, ToolPose>> substep_poses_;
    std::vector<std::pair<int, ToolPose>> previous_poses_;

    std::int64_t frame_ = 0;
    double time_ = 0.0;
    std::uint32_t topology_version_ = 0;
    double initial_mass_ = 0.0;
    double removed_mass_ = 0.0;
    std::vector<CutResult> cut_log_;
};

}  // namespace fetosim
