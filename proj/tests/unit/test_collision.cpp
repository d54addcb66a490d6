#include <random>

#include <gtest/gtest.h>

#include "fetosim/collision/bvh.hpp"
#include "fetosim/collision/contact.hpp"
#include "fetosim/collision/sdf.hpp"
#include "fetosim/harness/slab.hpp"
#include "fetosim/simulation.hpp"

using namespace fetosim;

namespace {

SdfShape random_shape(std::mt19937& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> r(0.1, 0.5);
    const Vec3 c(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
    switch (rng() % 4) {
    case 0: return SdfShape::sphere(c, r(rng));
    case 1: return SdfShape::capsule(c, c + 0.6 * Vec3(u(rng), u(rng), u(rng)), 0.5 * r(rng));
    case 2: {
        const Vec3 half(r(rng), r(rng), r(rng));
        Isometry pose = Isometry::Identity();
        pose.linear() = Quat(u(rng), u(rng), u(rng), u(rng)).normalized().toRotationMatrix();
        pose.translation() = c;
        return SdfShape::posed(SdfShape::rounded_box(half, 0.5 * half.minCoeff()), pose);
    }
    default:
        return SdfShape::make_union({SdfShape::sphere(c, r(rng)), SdfShape::sphere(-c, r(rng))});
    }
}

// Dense barycentric sampling of phi over a triangle: the narrow-phase oracle.
double sampled_minimum(const std::array<Vec3, 3>& v, const SdfShape& shape, int n = 140)
{
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; i + j <= n; ++j) {
            const double a = double(i) / n;
            const double b = double(j) / n;
            best = std::min(best, shape.distance(a * v[0] + b * v[1] + (1.0 - a - b) * v[2]));
        }
    }
    return best;
}

struct Soup {
    std::vector<Vec3> x;
    std::vector<CollisionElement> elements;
};

Soup random_triangles(std::mt19937& rng, int n)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Soup s;
    for (int t = 0; t < n; ++t) {
        const Vec3 c(u(rng), u(rng), u(rng));
        CollisionElement e;
        e.kind = ElementKind::Triangle;
        e.tri = t;
        for (int k = 0; k < 3; ++k) {
            e.verts[k] = static_cast<int>(s.x.size());
            s.x.push_back(c + 0.05 * Vec3(u(rng), u(rng), u(rng)));
        }
        s.elements.push_back(e);
    }
    return s;
}

}  // namespace

TEST(Sdf, SphereExamples)
{
    const SdfShape s = SdfShape::sphere(Vec3::Zero(), 1.0);
    const SdfSample out = s.eval(Vec3(2, 0, 0));
    EXPECT_DOUBLE_EQ(out.distance, 1.0);
    EXPECT_TRUE(out.gradient.isApprox(Vec3(1, 0, 0)));
    const SdfSample center = s.eval(Vec3::Zero());
    EXPECT_DOUBLE_EQ(center.distance, -1.0);
    EXPECT_EQ(center.gradient, Vec3(1, 0, 0));
}

TEST(Sdf, CapsuleCylindricalSection)
{
    const SdfShape c = SdfShape::capsule(Vec3::Zero(), Vec3(0, 0, 1), 0.1);
    const SdfSample out = c.eval(Vec3(0, 0.3, 0.5));
    EXPECT_NEAR(out.distance, 0.2, 1e-15);
    EXPECT_TRUE(out.gradient.isApprox(Vec3(0, 1, 0)));
    EXPECT_EQ(c.eval(Vec3(0, 0, 0.5)).gradient, Vec3(1, 0, 0));
}

TEST(Sdf, RoundedBoxAndPose)
{
    const SdfShape b = SdfShape::rounded_box(Vec3(1, 2, 3), 0.0);
    EXPECT_NEAR(b.distance(Vec3(2, 0, 0)), 1.0, 1e-15);
    EXPECT_NEAR(b.distance(Vec3(0, 0, 0)), -1.0, 1e-15);
    EXPECT_NEAR(b.distance(Vec3(2, 3, 0)), std::sqrt(2.0), 1e-15);
    const SdfShape r = SdfShape::rounded_box(Vec3(1, 1, 1), 0.25);
    // Nearest feature is the rounded vertical edge: axis at (0.75, 0.75), radius 0.25.
    EXPECT_NEAR(r.distance(Vec3(2, 2, 0)), std::sqrt(2.0) * 1.25 - 0.25, 1e-12);
    EXPECT_THROW(SdfShape::rounded_box(Vec3(1, 1, 1), 2.0), DomainError);

    Isometry pose = Isometry::Identity();
    pose.linear() = Eigen::AngleAxisd(0.5 * M_PI, Vec3::UnitZ()).toRotationMatrix();
    pose.translation() = Vec3(5, 0, 0);
    const SdfShape p = SdfShape::posed(b, pose);
    EXPECT_NEAR(p.distance(Vec3(5, 2, 0)), b.distance(Vec3(2, 0, 0)), 1e-12);
    EXPECT_TRUE(p.eval(Vec3(5, 2, 0)).gradient.isApprox(Vec3(0, 1, 0)));
}

TEST(Sdf, UnionIsMinimumAndSmoothUnionBounded)
{
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const SdfShape a = SdfShape::sphere(Vec3(-0.4, 0, 0), 0.5);
    const SdfShape b = SdfShape::capsule(Vec3(0.3, -0.5, 0), Vec3(0.3, 0.5, 0), 0.2);
    const SdfShape un = SdfShape::make_union({a, b});
    const double blend = 0.2;
    const SdfShape smooth = SdfShape::smooth_union(a, b, blend);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng));
        const double exact = std::min(a.distance(p), b.distance(p));
        EXPECT_EQ(un.distance(p), exact);
        const double s = smooth.distance(p);
        EXPECT_LE(s, exact + 1e-15);
        EXPECT_GE(s, exact - blend / 4.0 - 1e-15);
    }
}

TEST(Sdf, GradientsAreUnitAndMatchDifferences)
{
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    const double h = 1e-6;
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        const SdfShape shape = random_shape(rng);
        const Vec3 p(u(rng), u(rng), u(rng));
        const SdfSample s = shape.eval(p);
        EXPECT_NEAR(s.gradient.norm(), 1.0, 1e-12);
        Vec3 fd;
        for (int d = 0; d < 3; ++d) {
            Vec3 dp = Vec3::Zero();
            dp[d] = h;
            fd[d] = (shape.distance(p + dp) - shape.distance(p - dp)) / (2 * h);
        }
        // Skip the measure-zero neighbourhoods of medial surfaces.
        if (std::abs(fd.norm() - 1.0) < 1e-4) {
            EXPECT_LT((fd - s.gradient).norm(), 1e-4);
            ++checked;
        }
    }
    EXPECT_GT(checked, 200);
}

TEST(Sdf, BoundsContainInterior)
{
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        const SdfShape shape = random_shape(rng);
        const Aabb box = shape.bounds();
        for (int k = 0; k < 400; ++k) {
            const Vec3 p(u(rng), u(rng), u(rng));
            if (shape.distance(p) <= 0.0) {
                EXPECT_TRUE(box.overlaps(Aabb::of_point(p)));
            }
        }
    }
}

TEST(Bvh, SingleElementAndMisses)
{
    const std::vector<Vec3> x{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    CollisionElement e;
    e.kind = ElementKind::Triangle;
    e.verts = {0, 1, 2};
    const std::vector<CollisionElement> elements{e};
    const Bvh bvh = Bvh::build(elements, x, 0.1);
    ASSERT_EQ(bvh.nodes().size(), 1u);
    EXPECT_TRUE(bvh.root_box().min.isApprox(Vec3(-0.1, -0.1, -0.1)));
    EXPECT_TRUE(bvh.root_box().max.isApprox(Vec3(1.1, 1.1, 0.1)));
    std::vector<int> out;
    bvh.query({Vec3(5, 5, 5), Vec3(6, 6, 6)}, out);
    EXPECT_TRUE(out.empty());
    EXPECT_THROW(Bvh::build(std::vector<CollisionElement>{}, x), Error);
}

TEST(Bvh, NeverMissesAgainstBruteForce)
{
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> size(0.01, 0.4);
    Soup s = random_triangles(rng, 1000);
    Bvh bvh = Bvh::build(s.elements, s.x);

    auto check = [&](int queries) {
        for (int q = 0; q < queries; ++q) {
            const Vec3 c(u(rng), u(rng), u(rng));
            const Vec3 half(size(rng), size(rng), size(rng));
            const Aabb box{c - half, c + half};
            std::vector<int> got;
            bvh.query(box, got);
            EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
            for (std::size_t e = 0; e < s.elements.size(); ++e) {
                if (s.elements[e].bounds(s.x).overlaps(box)) {
                    ASSERT_TRUE(std::binary_search(got.begin(), got.end(), static_cast<int>(e)))
                        << "query " << q << " missed element " << e;
                }
            }
        }
    };
    check(1000);

    for (auto& p : s.x) {
        p += 0.2 * Vec3(u(rng), u(rng), u(rng));
    }
    bvh.refit(s.elements, s.x);
    for (const auto& node : bvh.nodes()) {
        if (!node.leaf()) {
            EXPECT_TRUE(node.box.contains(bvh.nodes()[node.left].box));
            EXPECT_TRUE(node.box.contains(bvh.nodes()[node.right].box));
        }
    }
    check(200);
}

TEST(NarrowPhase, VertexNearestSphere)
{
    const SdfShape sphere = SdfShape::sphere(Vec3(-1, 0, 0), 0.5);
    const std::array<Vec3, 3> tri{Vec3(0, 0, 0), Vec3(1, 0.5, 0), Vec3(1, -0.5, 0.2)};
    const ElementClosest c = closest_point_element_sdf(tri, sphere);
    EXPECT_NEAR(c.bary[0], 1.0, 1e-3);
    EXPECT_NEAR(c.phi, 0.5, 1e-6);
    EXPECT_LE(c.phi, sampled_minimum(tri, sphere) + 1e-4);
}

TEST(NarrowPhase, InteriorMinimum)
{
    const SdfShape sphere = SdfShape::sphere(Vec3::Zero(), 1.0);
    const double z = 0.9;
    const std::array<Vec3, 3> tri{Vec3(0.3, 0, z), Vec3(-0.15, 0.26, z), Vec3(-0.15, -0.26, z)};
    const ElementClosest c = closest_point_element_sdf(tri, sphere);
    for (int k = 0; k < 3; ++k) {
        EXPECT_GT(c.bary[k], 0.0);
    }
    EXPECT_NEAR(c.phi, sampled_minimum(tri, sphere), 1e-3);
}

TEST(NarrowPhase, DegenerateElementStillValid)
{
    const SdfShape sphere = SdfShape::sphere(Vec3(0, 2, 0), 1.0);
    const std::array<Vec3, 3> line{Vec3(-1, 0, 0), Vec3(1, 0, 0), Vec3(0, 0, 0)};
    const ElementClosest c = closest_point_element_sdf(line, sphere);
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
        EXPECT_GE(c.bary[k], 0.0);
        sum += c.bary[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(c.phi, 1.0, 1e-6);

    const std::array<Vec3, 3> point{Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0)};
    EXPECT_NEAR(closest_point_element_sdf(point, sphere).phi, 1.0, 1e-12);
}

TEST(NarrowPhase, SimplexProjection)
{
    std::array<double, 3> b{0.8, 0.8, -0.4};
    project_to_simplex(b);
    EXPECT_NEAR(b[0] + b[1] + b[2], 1.0, 1e-15);
    EXPECT_NEAR(b[0], 0.5, 1e-15);
    EXPECT_NEAR(b[2], 0.0, 1e-15);
}

TEST(NarrowPhase, WithinToleranceOfDenseSampling)
{
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int pair = 0; pair < 200; ++pair) {
        const SdfShape shape = random_shape(rng);
        const Vec3 c(u(rng), u(rng), u(rng));
        const std::array<Vec3, 3> tri{c + 0.4 * Vec3(u(rng), u(rng), u(rng)), c + 0.4 * Vec3(u(rng), u(rng), u(rng)),
                                      c + 0.4 * Vec3(u(rng), u(rng), u(rng))};
        const ElementClosest got = closest_point_element_sdf(tri, shape);
        EXPECT_LE(got.phi, sampled_minimum(tri, shape) + 1e-4) << "pair " << pair;
    }
}

TEST(Contacts, MatchBruteForce)
{
    SlabSpec spec;
    spec.cells = {8, 8, 2};
    const TetMesh mesh = make_slab(spec);
    const auto elements = surface_collision_elements(mesh);
    const Bvh bvh = Bvh::build(elements, mesh.vertices);

    std::vector<Contact> far;
    generate_contacts(bvh, elements, mesh.vertices, SdfShape::sphere(Vec3(0, 0, 1), 0.01), 1e-3, 0, far);
    EXPECT_TRUE(far.empty());

    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(-0.03, 0.03);
    for (int q = 0; q < 40; ++q) {
        const SdfShape s = SdfShape::sphere(Vec3(u(rng), u(rng), 0.01 + 0.3 * u(rng)), 0.004);
        std::vector<Contact> a;
        std::vector<Contact> b;
        generate_contacts(bvh, elements, mesh.vertices, s, 1e-3, 0, a);
        generate_contacts_brute_force(elements, mesh.vertices, s, 1e-3, 0, b);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].element, b[i].element);
        }
    }
}

TEST(Contacts, SphereOverlappingTriangleFace)
{
    const TetMesh mesh = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 1, 2, 3}});
    const auto elements = surface_collision_elements(mesh);
    const Bvh bvh = Bvh::build(elements, mesh.vertices);
    std::vector<Contact> out;
    generate_contacts(bvh, elements, mesh.vertices, SdfShape::sphere(Vec3(0.25, 0.25, -0.15), 0.2), 0.0, 0, out);
    ASSERT_FALSE(out.empty());
    bool bottom = false;
    for (const auto& c : out) {
        EXPECT_LT(c.phi, 0.0);
        if (c.kind == ElementKind::Triangle) {
            const auto& v = c.verts;
            bottom |= mesh.vertices[v[0]].z() == 0 && mesh.vertices[v[1]].z() == 0 && mesh.vertices[v[2]].z() == 0;
        }
    }
    EXPECT_TRUE(bottom);
}

TEST(ContactSolve, SeparatedContactDoesNothing)
{
    std::vector<Vec3> x{Vec3(0, 0, 1)};
    const std::vector<Vec3> prev = x;
    const std::vector<double> w{1.0};
    Contact c;
    c.verts = {0, -1, -1};
    c.lambda_n = 0.0;
    const ContactBody body{SdfShape::rounded_box(Vec3(1, 1, 0.5), 0.0), Isometry::Identity()};
    const ContactCorrection corr = solve_contact(c, x, prev, w, body, 0.5, 0.0, 1e-3);
    EXPECT_EQ(corr.normal, 0.0);
    EXPECT_EQ(c.lambda_n, 0.0);
    EXPECT_EQ(x[0], Vec3(0, 0, 1));
}

TEST(ContactSolve, HardPushOut)
{
    std::vector<Vec3> x{Vec3(0, 0, 0.49)};
    const std::vector<Vec3> prev = x;
    const std::vector<double> w{2.0};
    Contact c;
    c.verts = {0, -1, -1};
    const ContactBody body{SdfShape::rounded_box(Vec3(1, 1, 0.5), 0.0), Isometry::Identity()};
    solve_contact(c, x, prev, w, body, 0.5, 0.0, 1e-3);
    EXPECT_NEAR(x[0].z(), 0.5, 1e-15);
    EXPECT_NEAR(contact_force(c, 1e-3).z(), 0.01 / 2.0 / 1e-6, 1e-6);
}

TEST(ContactSolve, FrictionConeAndUnilaterality)
{
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    const double mu = 0.4;
    const ContactBody body{SdfShape::rounded_box(Vec3(2, 2, 0.5), 0.0), Isometry::Identity()};
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Vec3> x;
        std::vector<Vec3> prev;
        for (int k = 0; k < 3; ++k) {
            x.emplace_back(u(rng), u(rng), 0.5 + 0.02 * u(rng));
            prev.push_back(x.back() + 0.02 * Vec3(u(rng), u(rng), u(rng)));
        }
        const std::vector<double> w{pos(rng) + 0.1, pos(rng) + 0.1, pos(rng) + 0.1};
        Contact c;
        c.kind = ElementKind::Triangle;
        c.verts = {0, 1, 2};
        double a = pos(rng);
        double b = pos(rng) * (1 - a);
        c.bary = {a, b, 1 - a - b};
        const double compliance = 1e-6 * pos(rng);
        for (int pass = 0; pass < 3; ++pass) {
            const ContactCorrection corr = solve_contact(c, x, prev, w, body, mu, compliance, 1e-3);
            EXPECT_GE(c.lambda_n, 0.0);
            if (pass == 0) {
                EXPECT_LE(corr.tangential, mu * corr.normal + 1e-9);
            }
            // Repeated passes share one budget: mu times the accumulated normal correction.
            const double wsum = w[0] * a * a + w[1] * b * b + w[2] * c.bary[2] * c.bary[2];
            EXPECT_LE(c.tangential, mu * c.lambda_n * wsum + 1e-9);
        }
    }
}

TEST(ContactSolve, PostSolvePenetrationBounded)
{
    SlabSpec spec;
    TetMesh mesh = make_slab(spec);
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        mesh.pinned[v] = mesh.vertices[v].z() < 1e-9;
    }
    SimulationConfig cfg;
    cfg.material = MaterialParams::make(1e4, 0.49, 1000.0, 0.5);
    Simulation sim(mesh, cfg);
    ToolPose tool;
    tool.position = Vec3(0.0, 0.0, 0.0105);
    sim.add_tool(1, tool);
    for (int f = 0; f < 30; ++f) {
        sim.step_frame();
        tool.position.z() -= 0.0001;
        sim.set_tool_target(1, tool);
    }
    const SdfShape shape = tool_sdf(sim.tools().at(1).pose, cfg.geometry);
    double deepest = 0.0;
    for (int v : surface_vertices(sim.mesh())) {
        deepest = std::min(deepest, shape.distance(sim.state().x[v]));
    }
    EXPECT_GE(deepest, -0.1 * cfg.geometry.tip_radius);
}
