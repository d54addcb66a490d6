#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fetosim/harness/slab.hpp"
#include "fetosim/mesh.hpp"

using namespace fetosim;

namespace {

const char* kRegularTet = R"(# regular tetrahedron, edge 1 m
verts 4 tets 1
0 0 0
1 0 0
0.5 0.8660254037844386 0
0.5 0.28867513459481287 0.816496580927726
0 1 2 3
)";

TetMesh unit_cube_five()
{
    std::vector<Vec3> v;
    for (int k = 0; k < 2; ++k) {
        for (int j = 0; j < 2; ++j) {
            for (int i = 0; i < 2; ++i) {
                v.emplace_back(i, j, k);
            }
        }
    }
    // corner index i + 2j + 4k
    return make_mesh(v, {{0, 1, 2, 4}, {3, 2, 1, 7}, {5, 4, 7, 1}, {6, 7, 4, 2}, {1, 2, 4, 7}});
}

}  // namespace

TEST(Mesh, RegularTetVolume)
{
    std::istringstream in(kRegularTet);
    const TetMesh m = load_mesh(in);
    ASSERT_EQ(m.tet_count(), 1u);
    EXPECT_NEAR(m.rest_volume[0], 1.0 / (6.0 * std::sqrt(2.0)), 1e-12);
    EXPECT_EQ(m.surface.size(), 4u);
}

TEST(Mesh, CubeVolumePartition)
{
    const TetMesh m = unit_cube_five();
    double sum = 0.0;
    for (double v : m.rest_volume) {
        sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Mesh, RepeatedIndexRejected)
{
    std::istringstream in("verts 4 tets 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 1 3\n");
    EXPECT_THROW(load_mesh(in), ValidationError);
}

TEST(Mesh, ParseErrorsCarryLineNumbers)
{
    std::istringstream missing("verts 4 tets 1\n0 0 0\n1 0 0\n");
    try {
        load_mesh(missing);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4);
    }
    std::istringstream range("verts 4 tets 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2 9\n");
    EXPECT_THROW(load_mesh(range), ParseError);
    std::istringstream header("points 4\n");
    EXPECT_THROW(load_mesh(header), ParseError);
}

TEST(Mesh, WriteLoadRoundTrip)
{
    const TetMesh m = unit_cube_five();
    std::stringstream buf;
    write_mesh(buf, m);
    const TetMesh back = load_mesh(buf);
    ASSERT_EQ(back.vertex_count(), m.vertex_count());
    ASSERT_EQ(back.tet_count(), m.tet_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        EXPECT_EQ(back.vertices[i], m.vertices[i]);
    }
    EXPECT_EQ(back.tets, m.tets);
}

TEST(RestState, InverseTimesShapeIsIdentity)
{
    std::istringstream in(kRegularTet);
    const TetMesh m = load_mesh(in);
    const Tet& t = m.tets[0];
    Mat3 dm;
    for (int c = 0; c < 3; ++c) {
        dm.col(c) = m.vertices[t[c + 1]] - m.vertices[t[0]];
    }
    EXPECT_LT((m.rest_inv[0] * dm - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RestState, NegativeOrientationRepaired)
{
    const TetMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 2, 1, 3}});
    EXPECT_GT(m.rest_volume[0], 0.0);
    EXPECT_NEAR(m.rest_volume[0], 1.0 / 6.0, 1e-15);
    const Tet& t = m.tets[0];
    EXPECT_GT(signed_tet_volume(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]], m.vertices[t[3]]), 0.0);
}

TEST(RestState, CoplanarRejected)
{
    EXPECT_THROW(make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}}, {{0, 1, 2, 3}}), ValidationError);
}

TEST(RestState, Idempotent)
{
    TetMesh m = make_slab(SlabSpec{});
    const auto first = m.rest_inv;
    compute_rest_state(m);
    ASSERT_EQ(first.size(), m.rest_inv.size());
    for (std::size_t t = 0; t < first.size(); ++t) {
        EXPECT_EQ(std::memcmp(first[t].data(), m.rest_inv[t].data(), sizeof(Mat3)), 0);
    }
}

TEST(Lame, IndependentConversion)
{
    // Independent route: bulk modulus K and shear modulus G, lambda = K - 2G/3.
    auto reference = [](double e, double nu) {
        const double k = e / (3.0 * (1.0 - 2.0 * nu));
        const double g = e / (2.0 * (1.0 + nu));
        return std::pair{k - 2.0 * g / 3.0, g};
    };
    const auto [l, m] = reference(1e4, 0.49);
    const LameParameters p = lame_from_young_poisson(1e4, 0.49);
    EXPECT_NEAR(p.lambda, l, 1e-8 * l);
    EXPECT_NEAR(p.mu, m, 1e-8 * m);
    EXPECT_NEAR(p.lambda, 164429.5, 0.05);
    EXPECT_NEAR(p.mu, 3355.7, 0.05);
}

TEST(Lame, ZeroPoissonAndDomain)
{
    const LameParameters p = lame_from_young_poisson(1e4, 0.0);
    EXPECT_EQ(p.lambda, 0.0);
    EXPECT_DOUBLE_EQ(p.mu, 5000.0);
    EXPECT_THROW(lame_from_young_poisson(1e4, 0.5), DomainError);
    EXPECT_THROW(MaterialParams::make(-1.0, 0.3, 1000.0, 0.5), DomainError);
    EXPECT_THROW(MaterialParams::make(1e4, 0.3, 0.0, 0.5), DomainError);
}

TEST(Mass, EqualLumping)
{
    // Right tet scaled to V = 0.1 m^3.
    const double s = std::cbrt(0.6);
    TetMesh m = make_mesh({{0, 0, 0}, {s, 0, 0}, {0, s, 0}, {0, 0, s}}, {{0, 1, 2, 3}});
    vertex_masses_from_density(m, 1000.0);
    for (double mass : m.vertex_mass) {
        EXPECT_NEAR(mass, 25.0, 1e-9);
    }
}

TEST(Mass, PinnedStaysZero)
{
    TetMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 1, 2, 3}});
    m.pinned[2] = 1;
    vertex_masses_from_density(m, 5000.0);
    EXPECT_EQ(m.inv_mass[2], 0.0);
    EXPECT_GT(m.inv_mass[0], 0.0);
}

TEST(Mass, SharedVertexAdds)
{
    TetMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}},
                          {{0, 1, 2, 3}, {0, 4, 5, 6}});
    vertex_masses_from_density(m, 1000.0);
    const double quarter = 1000.0 / 6.0 / 4.0;
    EXPECT_NEAR(m.vertex_mass[0], 2.0 * quarter, 1e-9);
    EXPECT_NEAR(m.vertex_mass[1], quarter, 1e-9);
}

TEST(Surface, SingleTetOutward)
{
    const TetMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 1, 2, 3}});
    ASSERT_EQ(m.surface.size(), 4u);
    const Vec3 centroid(0.25, 0.25, 0.25);
    for (const auto& tri : m.surface) {
        const Vec3& a = m.vertices[tri.verts[0]];
        const Vec3 n = (m.vertices[tri.verts[1]] - a).cross(m.vertices[tri.verts[2]] - a);
        EXPECT_GT(n.dot(a - centroid), 0.0);
    }
}

TEST(Surface, SharedFaceCancels)
{
    TetMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}}, {{0, 1, 2, 3}, {1, 2, 3, 4}});
    EXPECT_EQ(m.surface.size(), 6u);
    m.alive[1] = 0;
    EXPECT_EQ(extract_surface(m).size(), 4u);
}

TEST(Surface, ClosedAndVolumeConsistent)
{
    SlabSpec spec;
    spec.cells = {6, 5, 3};
    TetMesh m = make_slab(spec);
    std::map<std::pair<int, int>, int> edges;
    for (const auto& tri : m.surface) {
        for (int e = 0; e < 3; ++e) {
            const int a = tri.verts[e];
            const int b = tri.verts[(e + 1) % 3];
            ++edges[{std::min(a, b), std::max(a, b)}];
        }
    }
    for (const auto& [edge, count] : edges) {
        EXPECT_EQ(count, 2);
    }

    std::mt19937 rng(7);
    std::normal_distribution<double> noise(0.0, 2e-4);
    std::vector<Vec3> x = m.vertices;
    for (auto& p : x) {
        p += Vec3(noise(rng), noise(rng), noise(rng));
    }
    double sum = 0.0;
    for (const auto& t : m.tets) {
        sum += signed_tet_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]);
    }
    const double vol = mesh_volume(m, x);
    EXPECT_NEAR(vol, sum, 1e-15);
    EXPECT_NEAR(enclosed_volume(m.surface, x), vol, 1e-6 * vol);
}

TEST(Slab, ElementCountsAndPlacode)
{
    SlabSpec spec;
    spec.placode_radius = 0.01;
    const TetMesh m = make_slab(spec);
    EXPECT_EQ(m.tet_count(), spec.element_count());
    EXPECT_EQ(m.vertex_count(), 18u * 18u * 4u);
    double vol = 0.0;
    int marked = 0;
    for (std::size_t t = 0; t < m.tet_count(); ++t) {
        vol += m.rest_volume[t];
        marked += m.region[t] == 1;
    }
    EXPECT_NEAR(vol, 0.06 * 0.06 * 0.01, 1e-12);
    EXPECT_GT(marked, 0);
    EXPECT_LT(marked, static_cast<int>(m.tet_count()));

    const auto cells = slab_cells_for(Vec3(0.06, 0.06, 0.01), 40000);
    const std::size_t n = 6ull * cells[0] * cells[1] * cells[2];
    EXPECT_GT(n, 30000u);
    EXPECT_LT(n, 50000u);
}
