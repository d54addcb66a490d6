#include "fetosim/harness/slab.hpp"

#include <algorithm>
#include <cmath>

namespace fetosim {

namespace {

// Six tets around the cube diagonal from corner 0 to corner 7, with
// corner index i + 2j + 4k.
constexpr std::array<std::array<int, 4>, 6> kKuhn{{
    {0, 1, 3, 7},
    {0, 1, 5, 7},
    {0, 2, 3, 7},
    {0, 2, 6, 7},
    {0, 4, 5, 7},
    {0, 4, 6, 7},
}};

}  // namespace

TetMesh make_slab(const SlabSpec& spec)
{
    const auto [nx, ny, nz] = spec.cells;
    if (nx < 1 || ny < 1 || nz < 1) {
        throw ValidationError("slab cell counts must be positive");
    }
    if (!(spec.size.minCoeff() > 0.0)) {
        throw ValidationError("slab size must be positive");
    }
    const Vec3 h(spec.size.x() / nx, spec.size.y() / ny, spec.size.z() / nz);
    auto index = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };

    std::vector<Vec3> verts;
    verts.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) * (nz + 1)));
    for (int k = 0; k <= nz; ++k) {
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                verts.push_back(spec.origin + Vec3(i * h.x(), j * h.y(), k * h.z()));
            }
        }
    }

    std::vector<Tet> tets;
    tets.reserve(spec.element_count());
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                std::array<int, 8> corner;
                for (int c = 0; c < 8; ++c) {
                    corner[c] = index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                }
                for (const auto& t : kKuhn) {
                    tets.push_back({corner[t[0]], corner[t[1]], corner[t[2]], corner[t[3]]});
                }
            }
        }
    }

    TetMesh mesh = make_mesh(std::move(verts), std::move(tets));

    const Vec3 axis = spec.origin + 0.5 * spec.size;
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        Vec3 c = Vec3::Zero();
        for (int v : mesh.tets[t]) {
            c += mesh.vertices[v];
        }
        c /= 4.0;
        const double r = std::hypot(c.x() - axis.x(), c.y() - axis.y());
        mesh.region[t] = r < spec.placode_radius ? 1 : 0;
    }

    if (!spec.placement.isApprox(Isometry::Identity())) {
        for (auto& v : mesh.vertices) {
            v = spec.placement * v;
        }
        compute_rest_state(mesh);
    }
    return mesh;
}

std::array<int, 3> slab_cells_for(const Vec3& size, std::size_t elements)
{
    const double cell = std::cbrt(size.prod() * 6.0 / static_cast<double>(std::max<std::size_t>(elements, 6)));
    std::array<int, 3> cells;
    for (int a = 0; a < 3; ++a) {
        cells[a] = std::max(1, static_cast<int>(std::lround(size[a] / cell)));
    }
    return cells;
}

}  // namespace fetosim
