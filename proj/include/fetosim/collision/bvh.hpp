#pragma once

#include <limits>
#include <span>
#include <vector>

#include "fetosim/types.hpp"

namespace fetosim {

struct TetMesh;

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    static Aabb of_point(const Vec3& p) { return {p, p}; }

    bool empty() const { return (min.array() > max.array()).any(); }

    void expand(const Vec3& p)
    {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }

    void expand(const Aabb& b)
    {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }

    Aabb inflated(double r) const { return {min.array() - r, max.array() + r}; }

    bool overlaps(const Aabb& b) const
    {
        return (min.array() <= b.max.array()).all() && (b.min.array() <= max.array()).all();
    }

    bool contains(const Aabb& b) const
    {
        return (min.array() <= b.min.array()).all() && (b.max.array() <= max.array()).all();
    }

    Vec3 center() const { return 0.5 * (min + max); }
};

enum class ElementKind : std::uint8_t { Vertex = 1, Edge = 2, Triangle = 3 };

/// A collision primitive on the tissue boundary: a point, an edge or a
/// triangle given by mesh vertex indices.
struct CollisionElement {
    ElementKind kind = ElementKind::Vertex;
    std::array<int, 3> verts{-1, -1, -1};
    int tri = -1;  // surface triangle index for triangle elements

    int count() const { return static_cast<int>(kind); }
    Aabb bounds(std::span<const Vec3> x) const;
};

/// Dynamic bounding volume hierarchy of axis-aligned boxes over collision
/// elements. Built once by median split, refit in place as positions move.
class Bvh {
public:
    struct Node {
        Aabb box;
        int left = -1;
        int right = -1;
        int element = -1;  // leaf payload, -1 for internal nodes

        bool leaf() const { return element >= 0; }
    };

    Bvh() = default;

    /// Throws Error on an empty element set. `margin` fattens every leaf.
    static Bvh build(std::span<const CollisionElement> elements, std::span<const Vec3> x,
                     double margin = 0.0);

    /// Updates all boxes bottom-up for new positions; topology unchanged.
    void refit(std::span<const CollisionElement> elements, std::span<const Vec3> x);

    /// Appends the indices of elements whose leaf box overlaps `box`,
    /// in ascending order.
    void query(const Aabb& box, std::vector<int>& out) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    const Aabb& root_box() const { return nodes_.front().box; }
    double margin() const { return margin_; }
    bool empty() const { return nodes_.empty(); }

private:
    int build_range(std::span<const CollisionElement> elements, std::span<const Vec3> x,
                    std::vector<int>& order, std::vector<Vec3>& centroids, int begin, int end);

    std::vector<Node> nodes_;
    double margin_ = 0.0;
};

/// Boundary elements used for tool contact: every surface triangle
/// followed by every surface vertex.
std::vector<CollisionElement> surface_collision_elements(const TetMesh& mesh);

}  // namespace fetosim
