#pragma once

#include <array>

#include "fetosim/mesh.hpp"

namespace fetosim {

/// Rectangular tissue phantom: a box of size `size` starting at `origin`,
/// split into cells[0] x cells[1] x cells[2] cubes of six tets each
/// (Kuhn subdivision, conforming across cells). Tets whose centroid lies
/// within `placode_radius` of the box's vertical axis get region 1.
/// `placement` is applied to the finished vertex positions.
struct SlabSpec {
    Vec3 size{0.06, 0.06, 0.01};
    std::array<int, 3> cells{17, 17, 3};
    Vec3 origin{-0.03, -0.03, 0.0};
    double placode_radius = 0.0;
    Isometry placement = Isometry::Identity();

    std::size_t element_count() const { return 6ull * cells[0] * cells[1] * cells[2]; }
};

TetMesh make_slab(const SlabSpec& spec);

/// Cell counts giving roughly `elements` tets with near-cubic cells for a
/// box of the given size.
std::array<int, 3> slab_cells_for(const Vec3& size, std::size_t elements);

}  // namespace fetosim
