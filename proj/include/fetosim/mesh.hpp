#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "fetosim/types.hpp"

namespace fetosim {

/// Elements at or below this rest volume (m^3) are rejected as degenerate.
inline constexpr double kDegenerateVolume = 1e-12;

/// Boundary triangle of the tetrahedral mesh. `verts` are wound so the
/// normal points out of the owning tet; `tet * 4 + local_face` is a stable
/// face id that survives surface re-extraction.
struct SurfaceTri {
    Tri verts;
    int tet = -1;
    int local_face = -1;

    int face_id() const { return tet * 4 + local_face; }
    bool operator==(const SurfaceTri&) const = default;
};

/// Tetrahedral discretization with per-element rest state and lumped
/// per-vertex masses. Positions are in meters.
struct TetMesh {
    std::vector<Vec3> vertices;
    std::vector<Tet> tets;

    std::vector<Mat3> rest_inv;       // D_m^-1 per tet
    std::vector<double> rest_volume;  // per tet, m^3

    std::vector<double> vertex_mass;  // kg, lumped
    std::vector<double> inv_mass;     // 1/kg, 0 for pinned or orphaned vertices
    std::vector<std::uint8_t> pinned;
    std::vector<std::uint8_t> alive;  // per tet
    std::vector<int> region;          // optional per-tet label, 0 when unused

    std::vector<SurfaceTri> surface;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t tet_count() const { return tets.size(); }
    std::size_t alive_count() const;
    double alive_rest_volume() const;
};

/// Young's modulus / Poisson ratio to Lame parameters.
struct LameParameters {
    double lambda = 0.0;
    double mu = 0.0;
};

LameParameters lame_from_young_poisson(double young_modulus, double poisson_ratio);

struct MaterialParams {
    double young_modulus = 1e4;  // Pa
    double poisson_ratio = 0.45;
    double density = 1000.0;     // kg/m^3
    double friction_coeff = 0.5;
    double lame_lambda = 0.0;    // Pa, derived
    double lame_mu = 0.0;        // Pa, derived

    /// Validates the inputs and fills the derived Lame fields.
    static MaterialParams make(double young_modulus, double poisson_ratio, double density,
                               double friction_coeff);
};

/// Parses the plain-text node/element format:
///   verts N tets M
///   x y z            (N lines, meters)
///   i j k l          (M lines, 0-based)
/// `#` starts a comment. Rest state and surface are populated on return.
TetMesh load_mesh(std::istream& in);
TetMesh load_mesh_file(const std::filesystem::path& path);

void write_mesh(std::ostream& out, const TetMesh& mesh);

/// Builds a mesh from raw arrays and runs compute_rest_state.
TetMesh make_mesh(std::vector<Vec3> vertices, std::vector<Tet> tets);

/// Fills rest_inv and rest_volume, repairing negatively oriented tets by
/// swapping their last two indices. Throws ValidationError naming the tet
/// when an element is degenerate. Also sizes the per-vertex/per-tet arrays
/// and re-extracts the surface.
void compute_rest_state(TetMesh& mesh);

/// Distributes density * V / 4 of each alive tet to its vertices.
/// Pinned vertices and vertices without alive tets get inv_mass = 0.
void vertex_masses_from_density(TetMesh& mesh, double density);

/// Faces that belong to exactly one alive tet, wound outward.
std::vector<SurfaceTri> extract_surface(const TetMesh& mesh);

/// Vertex indices of local face `f` (the face opposite local vertex `f`),
/// ordered so the normal points outward for a positively oriented tet.
Tri tet_face(const Tet& tet, int f);

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Sum of signed volumes of alive tets at positions `x`.
double mesh_volume(const TetMesh& mesh, std::span<const Vec3> x);

/// Volume enclosed by `surface` via the divergence theorem.
double enclosed_volume(std::span<const SurfaceTri> surface, std::span<const Vec3> x);

/// Per-vertex list of surface triangles (indices into `surface`).
std::vector<std::vector<int>> vertex_surface_adjacency(const TetMesh& mesh);

/// Unique vertices referenced by the surface, in ascending order.
std::vector<int> surface_vertices(const TetMesh& mesh);

}  // namespace fetosim
