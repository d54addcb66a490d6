#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "fetosim/collision/bvh.hpp"
#include "fetosim/types.hpp"

namespace fetosim {

struct SdfSample {
    double distance = 0.0;  // m, negative inside
    Vec3 gradient = Vec3::UnitX();
};

/// Analytic signed distance field for instrument geometry. Shapes are
/// immutable values; composites share their children.
///
/// Primitives return exact distances. Smooth unions return a lower bound
/// that is never below (exact union distance - blend / 4). Gradients are
/// unit length; at interior singularities (sphere center, capsule axis,
/// box medial planes) ties resolve toward +x, then +y, then +z.
class SdfShape {
public:
    enum class Kind { Sphere, Capsule, RoundedBox, Union, SmoothUnion, Posed };

    struct Sphere {
        Vec3 center;
        double radius;
    };
    struct Capsule {
        Vec3 a;
        Vec3 b;
        double radius;
    };
    /// Box centered at the origin, axis aligned, with outer half extents
    /// `half` and edges rounded by `radius`.
    struct RoundedBox {
        Vec3 half;
        double radius;
    };
    struct Union {
        std::vector<SdfShape> children;
    };
    struct SmoothUnion {
        std::vector<SdfShape> children;  // exactly two
        double blend;
    };
    struct Posed {
        std::vector<SdfShape> children;  // exactly one
        Isometry pose;
    };

    static SdfShape sphere(const Vec3& center, double radius);
    static SdfShape capsule(const Vec3& a, const Vec3& b, double radius);
    static SdfShape rounded_box(const Vec3& half_extents, double radius);
    static SdfShape make_union(std::vector<SdfShape> children);
    static SdfShape smooth_union(SdfShape a, SdfShape b, double blend);
    static SdfShape posed(SdfShape child, const Isometry& pose);

    SdfShape();

    Kind kind() const;
    SdfSample eval(const Vec3& p) const;
    double distance(const Vec3& p) const { return eval(p).distance; }

    /// World-space box enclosing every point with distance <= 0.
    Aabb bounds() const;

    template <class T>
    const T* as() const
    {
        return std::get_if<T>(&node_->data);
    }

private:
    struct Node {
        std::variant<Sphere, Capsule, RoundedBox, Union, SmoothUnion, Posed> data;
    };

    explicit SdfShape(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    std::shared_ptr<const Node> node_;
};

}  // namespace fetosim
