#include "fetosim/collision/sdf.hpp"

#include <algorithm>
#include <cmath>

namespace fetosim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

SdfSample point_distance(const Vec3& p, const Vec3& c, double radius)
{
    const Vec3 d = p - c;
    const double len = d.norm();
    SdfSample s;
    s.distance = len - radius;
    s.gradient = len > 1e-12 ? Vec3(d / len) : Vec3::UnitX();
    return s;
}

double sign_or_plus(double v) { return v < 0.0 ? -1.0 : 1.0; }

SdfSample rounded_box_eval(const SdfShape::RoundedBox& box, const Vec3& p)
{
    const Vec3 inner = box.half.array() - box.radius;
    const Vec3 q = p.cwiseAbs() - inner;
    const Vec3 outside = q.cwiseMax(0.0);
    const double outside_len = outside.norm();

    SdfSample s;
    if (outside_len > 0.0) {
        s.distance = outside_len - box.radius;
        for (int k = 0; k < 3; ++k) {
            s.gradient[k] = sign_or_plus(p[k]) * outside[k] / outside_len;
        }
        return s;
    }
    int axis = 0;
    for (int k = 1; k < 3; ++k) {
        if (q[k] > q[axis]) {
            axis = k;
        }
    }
    s.distance = q[axis] - box.radius;
    s.gradient = Vec3::Zero();
    s.gradient[axis] = sign_or_plus(p[axis]);
    return s;
}

}  // namespace

SdfShape::SdfShape() : SdfShape(sphere(Vec3::Zero(), 0.0)) {}

SdfShape SdfShape::sphere(const Vec3& center, double radius)
{
    return SdfShape(std::make_shared<const Node>(Node{Sphere{center, radius}}));
}

SdfShape SdfShape::capsule(const Vec3& a, const Vec3& b, double radius)
{
    return SdfShape(std::make_shared<const Node>(Node{Capsule{a, b, radius}}));
}

SdfShape SdfShape::rounded_box(const Vec3& half_extents, double radius)
{
    if ((half_extents.array() < radius).any() || radius < 0.0) {
        throw DomainError("rounded box radius exceeds a half extent");
    }
    return SdfShape(std::make_shared<const Node>(Node{RoundedBox{half_extents, radius}}));
}

SdfShape SdfShape::make_union(std::vector<SdfShape> children)
{
    if (children.empty()) {
        throw DomainError("union needs at least one child");
    }
    return SdfShape(std::make_shared<const Node>(Node{Union{std::move(children)}}));
}

SdfShape SdfShape::smooth_union(SdfShape a, SdfShape b, double blend)
{
    if (!(blend > 0.0)) {
        throw DomainError("smooth union blend radius must be positive");
    }
    return SdfShape(std::make_shared<const Node>(Node{SmoothUnion{{std::move(a), std::move(b)}, blend}}));
}

SdfShape SdfShape::posed(SdfShape child, const Isometry& pose)
{
    return SdfShape(std::make_shared<const Node>(Node{Posed{{std::move(child)}, pose}}));
}

SdfShape::Kind SdfShape::kind() const
{
    return static_cast<Kind>(node_->data.index());
}

SdfSample SdfShape::eval(const Vec3& p) const
{
    return std::visit(
        Overloaded{
            [&](const Sphere& s) { return point_distance(p, s.center, s.radius); },
            [&](const Capsule& c) {
                const Vec3 ab = c.b - c.a;
                const double len2 = ab.squaredNorm();
                const double t = len2 > 0.0 ? std::clamp((p - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
                return point_distance(p, c.a + t * ab, c.radius);
            },
            [&](const RoundedBox& b) { return rounded_box_eval(b, p); },
            [&](const Union& u) {
                SdfSample best = u.children.front().eval(p);
                for (std::size_t i = 1; i < u.children.size(); ++i) {
                    const SdfSample s = u.children[i].eval(p);
                    if (s.distance < best.distance) {
                        best = s;
                    }
                }
                return best;
            },
            [&](const SmoothUnion& u) {
                const SdfSample a = u.children[0].eval(p);
                const SdfSample b = u.children[1].eval(p);
                const double k = u.blend;
                const double h = std::clamp(0.5 + 0.5 * (b.distance - a.distance) / k, 0.0, 1.0);
                SdfSample s;
                s.distance = b.distance * (1.0 - h) + a.distance * h - k * h * (1.0 - h);
                // d(distance)/da = h and d(distance)/db = 1 - h exactly.
                const Vec3 g = h * a.gradient + (1.0 - h) * b.gradient;
                const double n = g.norm();
                s.gradient = n > 1e-12 ? Vec3(g / n) : a.gradient;
                return s;
            },
            [&](const Posed& posed) {
                SdfSample s = posed.children.front().eval(posed.pose.inverse() * p);
                s.gradient = posed.pose.linear() * s.gradient;
                return s;
            },
        },
        node_->data);
}

Aabb SdfShape::bounds() const
{
    return std::visit(
        Overloaded{
            [](const Sphere& s) { return Aabb::of_point(s.center).inflated(s.radius); },
            [](const Capsule& c) {
                Aabb b = Aabb::of_point(c.a);
                b.expand(c.b);
                return b.inflated(c.radius);
            },
            [](const RoundedBox& b) { return Aabb{-b.half, b.half}; },
            [](const Union& u) {
                Aabb b;
                for (const auto& c : u.children) {
                    b.expand(c.bounds());
                }
                return b;
            },
            [](const SmoothUnion& u) {
                Aabb b = u.children[0].bounds();
                b.expand(u.children[1].bounds());
                return b.inflated(u.blend);
            },
            [](const Posed& posed) {
                const Aabb local = posed.children.front().bounds();
                Aabb b;
                for (int corner = 0; corner < 8; ++corner) {
                    const Vec3 c((corner & 1) ? local.max.x() : local.min.x(),
                                 (corner & 2) ? local.max.y() : local.min.y(),
                                 (corner & 4) ? local.max.z() : local.min.z());
                    b.expand(posed.pose * c);
                }
                return b;
            },
        },
        node_->data);
}

}  // namespace fetosim
