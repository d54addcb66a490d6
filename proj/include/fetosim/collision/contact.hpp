#pragma once

#include <limits>
#include <span>
#include <vector>

#include "fetosim/collision/bvh.hpp"
#include "fetosim/collision/sdf.hpp"

namespace fetosim {

/// Result of minimizing the SDF over a simplex element.
struct ElementClosest {
    std::array<double, 4> bary{1.0, 0.0, 0.0, 0.0};
    Vec3 point = Vec3::Zero();
    double phi = 0.0;
    Vec3 normal = Vec3::UnitX();
    bool converged = true;
};

inline constexpr int kNarrowPhaseIterations = 16;
/// Spatial step (m) at which the pattern-search polish stops.
inline constexpr double kNarrowPhaseTolerance = 1e-6;

/// Minimizes phi(sum b_i x_i) over the barycentric simplex of a point,
/// edge, triangle or tetrahedron (1 to 4 vertices). Seeds from a coarse
/// barycentric grid, runs a fixed number of projected gradient iterations
/// (step halving until the objective decreases), then polishes with a
/// pattern search over directions spread evenly in the element's span
/// whenever the descent ran out of iterations or ended inside the shape.
/// Degenerate elements collapse
/// gracefully to their lower-dimensional faces. When the element provably
/// stays at or above `cutoff`, the search stops early and returns a point
/// whose phi is only an upper bound of the minimum (still >= cutoff).
ElementClosest closest_point_element_sdf(std::span<const Vec3> verts, const SdfShape& shape,
                                         double cutoff = std::numeric_limits<double>::infinity());

/// Euclidean projection onto the probability simplex of dimension n <= 4.
void project_to_simplex(std::span<double> b);

/// A unilateral contact between a boundary element and a tool SDF.
struct Contact {
    int element = -1;  // index into the collision element list
    int tri = -1;      // surface triangle for triangle contacts
    ElementKind kind = ElementKind::Vertex;
    std::array<int, 3> verts{-1, -1, -1};
    std::array<double, 3> bary{1.0, 0.0, 0.0};
    double phi = 0.0;  // m, negative when penetrating
    Vec3 normal = Vec3::UnitX();
    int tool = -1;

    double lambda_n = 0.0;              // accumulated normal multiplier, >= 0
    double tangential = 0.0;            // accumulated tangential correction, m
    Vec3 tangential_dir = Vec3::Zero();

    int count() const { return static_cast<int>(kind); }
};

/// Tool state used while solving contacts: its SDF at the current
/// substep and the rigid motion it underwent since the substep start.
struct ContactBody {
    SdfShape shape;
    Isometry motion = Isometry::Identity();
};

/// Narrow-phase test of one element. Triangle minima that land on a
/// vertex are dropped because the vertex element reports that contact.
bool narrow_phase_element(const CollisionElement& e, std::span<const Vec3> x, const SdfShape& shape,
                          double margin, Contact& out);

/// Broad phase through the BVH, narrow phase per candidate. Emits
/// contacts with phi < margin, ordered by element index.
void generate_contacts(const Bvh& bvh, std::span<const CollisionElement> elements, std::span<const Vec3> x,
                       const SdfShape& shape, double margin, int tool, std::vector<Contact>& out,
                       bool parallel = false);

/// Same as generate_contacts but tests every element (oracle path).
void generate_contacts_brute_force(std::span<const CollisionElement> elements, std::span<const Vec3> x,
                                   const SdfShape& shape, double margin, int tool,
                                   std::vector<Contact>& out);

struct ContactCorrection {
    double normal = 0.0;      // contact-point displacement along the normal, m
    double tangential = 0.0;  // contact-point friction displacement, m
    bool degenerate = false;
};

/// One XPBD projection of a contact: unilateral push-out along the SDF
/// normal, then position-level Coulomb friction from the relative motion
/// since the previous substep, limited to mu * (normal correction).
ContactCorrection solve_contact(Contact& c, std::span<Vec3> x, std::span<const Vec3> x_prev,
                                std::span<const double> inv_mass, const ContactBody& body, double friction,
                                double compliance, double dt);

/// Contact force on the tissue, lambda_n * n / dt^2.
Vec3 contact_force(const Contact& c, double dt);

}  // namespace fetosim
