#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fetosim/collision/contact.hpp"
#include "fetosim/collision/sdf.hpp"
#include "fetosim/mesh.hpp"
#include "fetosim/solver.hpp"

namespace fetosim {

enum class ToolKind { Diathermy, Scissors, Grasper };

std::string to_string(ToolKind kind);
ToolKind tool_kind_from_string(const std::string& name);

/// Rigid instrument pose. The tool frame has its tip at the origin and the
/// shaft running along +z; jaws open along +/-y.
struct ToolPose {
    ToolKind kind = ToolKind::Diathermy;
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();
    double jaw = 1.0;  // 0 closed, 1 fully open
    bool active = false;

    Isometry transform() const;
    /// Normalizes the quaternion and clamps the jaw into [0, 1].
    void sanitize();
};

/// Pose at parameter t in [0, 1]: linear position and jaw, shortest-arc
/// slerp for orientation. Kind and activation come from `b` unless t = 0.
ToolPose interpolate(const ToolPose& a, const ToolPose& b, double t);

/// Instrument dimensions, meters.
struct ToolGeometry {
    double shaft_radius = 0.0015;
    double shaft_length = 0.08;
    double tip_radius = 0.0015;  // diathermy ball tip
    double jaw_length = 0.012;
    double jaw_width = 0.003;
    double jaw_thickness = 0.0015;
    double jaw_rounding = 0.0005;
    double max_aperture = 0.01;  // jaw centerline separation at jaw = 1
    double blend = 0.001;        // jaw/shaft smooth-union radius
    double blade_radius = 0.0015;
};

/// World-space instrument SDF. Diathermy: shaft capsule plus ball tip.
/// Grasper and scissors: two jaws smooth-unioned with the shaft.
SdfShape tool_sdf(const ToolPose& pose, const ToolGeometry& geometry);

/// The two jaws only, at the given opening.
SdfShape jaw_sdf(const ToolPose& pose, const ToolGeometry& geometry, double jaw);

/// Closed-jaw cutting segment: capsule along the jaw length.
SdfShape blade_sdf(const ToolPose& pose, const ToolGeometry& geometry);

struct DiathermyConfig {
    double rate = 4.0;       // energy units per second of contact
    double threshold = 1.0;  // energy at which a face is coagulated
};

/// Accumulated thermal energy per tet face (indexed by SurfaceTri::face_id),
/// so marks survive surface re-extraction after cuts.
class CoagulationState {
public:
    CoagulationState() = default;
    CoagulationState(std::size_t tet_count, double threshold)
        : energy_(tet_count * 4, 0.0), threshold_(threshold) {}

    void add(int face_id, double amount);
    double energy(int face_id) const { return energy_[face_id]; }
    bool coagulated(int face_id) const { return energy_[face_id] >= threshold_; }
    double threshold() const { return threshold_; }
    std::size_t coagulated_count() const;

    /// Flags for the current surface triangles, in surface order.
    std::vector<std::uint8_t> surface_flags(const TetMesh& mesh) const;

    /// Vertices of all coagulated faces.
    std::vector<std::uint8_t> coagulated_vertices(const TetMesh& mesh) const;

private:
    std::vector<double> energy_;
    double threshold_ = 1.0;
};

/// Surface triangles touched by `contacts`: triangle contacts directly,
/// vertex contacts through their incident triangles. Sorted, unique.
std::vector<int> touched_triangles(std::span<const Contact> contacts,
                                   std::span<const std::vector<int>> vertex_triangles);

/// When the diathermy is active, every touched face gains rate * dt.
void apply_diathermy(const ToolPose& pose, std::span<const Contact> contacts, const TetMesh& mesh,
                     std::span<const std::vector<int>> vertex_triangles, double dt,
                     const DiathermyConfig& config, CoagulationState& state);

struct CutConfig {
    bool require_coagulation = true;
    double max_fraction = 0.2;  // runaway-cut guard
};

struct CutResult {
    std::vector<int> removed_tets;
    double removed_mass = 0.0;
    bool rejected = false;
    std::string diagnostic;
};

/// Tets overlapping the blade (and, when gated, touching a coagulated
/// face vertex), in ascending order.
std::vector<int> cut_candidates(const ToolPose& pose, const ToolGeometry& geometry, const TetMesh& mesh,
                                std::span<const Vec3> x, const CoagulationState& coagulation,
                                const CutConfig& config);

/// Removes the cut candidates, re-extracts the surface, re-lumps masses
/// (orphaned vertices freeze with inv_mass = 0) and zeroes their velocity.
/// Cuts that would remove more than max_fraction of alive tets are
/// rejected without modifying anything.
CutResult apply_scissors_cut(const ToolPose& pose, const ToolGeometry& geometry, TetMesh& mesh,
                             SolverState& state, const CoagulationState& coagulation, const CutConfig& config,
                             double density);

struct GraspConfig {
    double compliance = 0.0;      // m/N
    double dilation = 0.002;      // grasp region beyond the closed jaws, m
    double close_threshold = 0.1;
    double open_threshold = 0.5;
};

/// Vertices held by a grasper, with their targets in the tool frame.
struct GraspState {
    struct Held {
        Attachments::Handle handle = 0;
        int vertex = -1;
        Vec3 local = Vec3::Zero();
    };
    bool closed = false;
    std::vector<Held> held;
};

/// Grasp state machine for one substep: closing below close_threshold
/// attaches every surface vertex inside the dilated closed-jaw region,
/// opening above open_threshold releases them, and while closed the
/// targets follow the tool. Returns the handles created this call.
std::vector<Attachments::Handle> apply_grasper(const ToolPose& pose, const ToolGeometry& geometry,
                                               const TetMesh& mesh, std::span<const Vec3> x,
                                               Attachments& attachments, GraspState& grasp,
                                               const GraspConfig& config);

/// Connected components of alive tets, where tets sharing any vertex are
/// connected. Returns the component count.
int alive_components(const TetMesh& mesh, std::vector<int>* labels = nullptr);

}  // namespace fetosim
