#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fetosim/harness/slab.hpp"
#include "fetosim/simulation.hpp"

namespace fetosim {

/// Pins vertices with normal . x >= offset.
struct HalfSpace {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;
};

struct PinSelection {
    std::vector<int> indices;
    std::vector<HalfSpace> half_spaces;

    bool empty() const { return indices.empty() && half_spaces.empty(); }
    /// Marks the selected vertices as pinned. Throws ValidationError for an
    /// out-of-range index.
    void apply(TetMesh& mesh) const;
};

struct Keyframe {
    double time = 0.0;  // s
    ToolPose pose;
};

/// Timestamped tool poses per tool id. Between keyframes the position and
/// jaw are linear, orientation is shortest-arc slerp and activation holds
/// the earlier keyframe's value.
class Trajectory {
public:
    void add(int tool, const Keyframe& key);
    bool empty() const { return tracks_.empty(); }
    bool has(int tool) const { return tracks_.contains(tool); }
    const std::map<int, std::vector<Keyframe>>& tracks() const { return tracks_; }
    double end_time() const;

    /// Throws ValidationError unless timestamps are strictly increasing.
    void validate() const;
    ToolPose sample(int tool, double time) const;

private:
    std::map<int, std::vector<Keyframe>> tracks_;
};

/// Reads `time,tool,px,py,pz,qw,qx,qy,qz,jaw,active` rows with a header.
/// Tool kinds are taken from `kinds` (tool id -> kind).
Trajectory read_trajectory_csv(std::istream& in, const std::map<int, ToolKind>& kinds);
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

struct ToolSpec {
    int id = 0;
    ToolPose pose;
    bool collide = true;
};

struct Scenario {
    std::string name;
    std::filesystem::path base_dir;
    std::optional<std::filesystem::path> mesh_path;
    std::optional<SlabSpec> slab;
    SimulationConfig config;
    PinSelection pins;
    std::vector<ToolSpec> tools;
    std::vector<SdfShape> obstacles;
    Trajectory trajectory;
    double duration = 1.0;  // s
    std::filesystem::path output;

    std::int64_t frame_count() const;
    /// Checks the invariants (files exist, duration > 0, solver config,
    /// trajectory tools declared and monotone).
    void validate() const;
};

/// Parses a scenario document. Relative paths resolve against `base_dir`.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Loads or generates the mesh and applies the pins.
TetMesh build_mesh(const Scenario& scenario);
Simulation make_simulation(const Scenario& scenario);

}  // namespace fetosim
