#include "fetosim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace fetosim {

namespace {

std::string strip_comment(const std::string& line)
{
    const auto hash = line.find('#');
    return hash == std::string::npos ? line : line.substr(0, hash);
}

bool is_blank(const std::string& s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

// Reads the next non-blank, comment-stripped line. Returns false on EOF.
bool next_line(std::istream& in, std::string& out, int& line_no)
{
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        out = strip_comment(raw);
        if (!is_blank(out)) {
            return true;
        }
    }
    return false;
}

Mat3 shape_matrix(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3)
{
    Mat3 d;
    d.col(0) = x1 - x0;
    d.col(1) = x2 - x0;
    d.col(2) = x3 - x0;
    return d;
}

}  // namespace

std::size_t TetMesh::alive_count() const
{
    return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), std::uint8_t{1}));
}

double TetMesh::alive_rest_volume() const
{
    double v = 0.0;
    for (std::size_t t = 0; t < tets.size(); ++t) {
        if (alive[t]) {
            v += rest_volume[t];
        }
    }
    return v;
}

LameParameters lame_from_young_poisson(double young_modulus, double poisson_ratio)
{
    if (!(young_modulus > 0.0)) {
        throw DomainError("Young's modulus must be positive");
    }
    if (!(poisson_ratio >= 0.0) || !(poisson_ratio < 0.5)) {
        throw DomainError("Poisson ratio must lie in [0, 0.5)");
    }
    const double e = young_modulus;
    const double nu = poisson_ratio;
    return {e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu))};
}

MaterialParams MaterialParams::make(double young_modulus, double poisson_ratio, double density,
                                    double friction_coeff)
{
    if (!(density > 0.0)) {
        throw DomainError("density must be positive");
    }
    if (!(friction_coeff > 0.0)) {
        throw DomainError("friction coefficient must be positive");
    }
    const auto lame = lame_from_young_poisson(young_modulus, poisson_ratio);
    MaterialParams m;
    m.young_modulus = young_modulus;
    m.poisson_ratio = poisson_ratio;
    m.density = density;
    m.friction_coeff = friction_coeff;
    m.lame_lambda = lame.lambda;
    m.lame_mu = lame.mu;
    return m;
}

TetMesh load_mesh(std::istream& in)
{
    int line_no = 0;
    std::string line;
    if (!next_line(in, line, line_no)) {
        throw ParseError(line_no + 1, "missing 'verts N tets M' header");
    }

    long long nverts = -1;
    long long ntets = -1;
    {
        std::istringstream ss(line);
        std::string kv;
        std::string kt;
        std::string extra;
        if (!(ss >> kv >> nverts >> kt >> ntets) || kv != "verts" || kt != "tets" || (ss >> extra) ||
            nverts < 0 || ntets < 0) {
            throw ParseError(line_no, "expected header 'verts N tets M'");
        }
    }

    std::vector<Vec3> vertices;
    vertices.reserve(static_cast<std::size_t>(nverts));
    for (long long i = 0; i < nverts; ++i) {
        if (!next_line(in, line, line_no)) {
            throw ParseError(line_no + 1, "unexpected end of file, expected vertex " + std::to_string(i));
        }
        std::istringstream ss(line);
        Vec3 p;
        std::string extra;
        if (!(ss >> p.x() >> p.y() >> p.z()) || (ss >> extra) || !p.allFinite()) {
            throw ParseError(line_no, "expected three finite coordinates");
        }
        vertices.push_back(p);
    }

    std::vector<Tet> tets;
    tets.reserve(static_cast<std::size_t>(ntets));
    for (long long i = 0; i < ntets; ++i) {
        if (!next_line(in, line, line_no)) {
            throw ParseError(line_no + 1, "unexpected end of file, expected tet " + std::to_string(i));
        }
        std::istringstream ss(line);
        long long idx[4];
        std::string extra;
        if (!(ss >> idx[0] >> idx[1] >> idx[2] >> idx[3]) || (ss >> extra)) {
            throw ParseError(line_no, "expected four vertex indices");
        }
        Tet t{};
        for (int k = 0; k < 4; ++k) {
            if (idx[k] < 0 || idx[k] >= nverts) {
                throw ParseError(line_no, "vertex index " + std::to_string(idx[k]) + " out of range");
            }
            t[k] = static_cast<int>(idx[k]);
        }
        tets.push_back(t);
    }

    if (next_line(in, line, line_no)) {
        throw ParseError(line_no, "trailing content after last tet");
    }

    return make_mesh(std::move(vertices), std::move(tets));
}

TetMesh load_mesh_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open mesh file " + path.string());
    }
    return load_mesh(in);
}

void write_mesh(std::ostream& out, const TetMesh& mesh)
{
    const auto old_precision = out.precision(17);
    out << "verts " << mesh.vertices.size() << " tets " << mesh.tets.size() << '\n';
    for (const auto& p : mesh.vertices) {
        out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    for (const auto& t : mesh.tets) {
        out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    }
    out.precision(old_precision);
}

TetMesh make_mesh(std::vector<Vec3> vertices, std::vector<Tet> tets)
{
    TetMesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.tets = std::move(tets);
    compute_rest_state(mesh);
    return mesh;
}

void compute_rest_state(TetMesh& mesh)
{
    const std::size_t nt = mesh.tets.size();
    const std::size_t nv = mesh.vertices.size();
    mesh.rest_inv.resize(nt);
    mesh.rest_volume.resize(nt);

    for (std::size_t t = 0; t < nt; ++t) {
        Tet& tet = mesh.tets[t];
        for (int k = 0; k < 4; ++k) {
            if (tet[k] < 0 || static_cast<std::size_t>(tet[k]) >= nv) {
                throw ValidationError("tet " + std::to_string(t) + " references a missing vertex");
            }
        }
        Mat3 dm = shape_matrix(mesh.vertices[tet[0]], mesh.vertices[tet[1]], mesh.vertices[tet[2]],
                               mesh.vertices[tet[3]]);
        double volume = dm.determinant() / 6.0;
        if (volume < 0.0) {
            std::swap(tet[2], tet[3]);
            dm = shape_matrix(mesh.vertices[tet[0]], mesh.vertices[tet[1]], mesh.vertices[tet[2]],
                              mesh.vertices[tet[3]]);
            volume = dm.determinant() / 6.0;
        }
        if (!(volume > kDegenerateVolume)) {
            throw ValidationError("tet " + std::to_string(t) + " is degenerate (rest volume " +
                                  std::to_string(volume) + " m^3)");
        }
        mesh.rest_volume[t] = volume;
        mesh.rest_inv[t] = dm.inverse();
    }

    mesh.vertex_mass.resize(nv, 0.0);
    mesh.inv_mass.resize(nv, 0.0);
    mesh.pinned.resize(nv, 0);
    mesh.alive.resize(nt, 1);
    mesh.region.resize(nt, 0);
    mesh.surface = extract_surface(mesh);
}

void vertex_masses_from_density(TetMesh& mesh, double density)
{
    const std::size_t nv = mesh.vertices.size();
    mesh.vertex_mass.assign(nv, 0.0);
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive[t]) {
            continue;
        }
        const double share = density * mesh.rest_volume[t] / 4.0;
        for (int v : mesh.tets[t]) {
            mesh.vertex_mass[v] += share;
        }
    }
    mesh.inv_mass.assign(nv, 0.0);
    for (std::size_t v = 0; v < nv; ++v) {
        if (!mesh.pinned[v] && mesh.vertex_mass[v] > 0.0) {
            mesh.inv_mass[v] = 1.0 / mesh.vertex_mass[v];
        }
    }
}

Tri tet_face(const Tet& t, int f)
{
    switch (f) {
    case 0: return {t[1], t[2], t[3]};
    case 1: return {t[0], t[3], t[2]};
    case 2: return {t[0], t[1], t[3]};
    default: return {t[0], t[2], t[1]};
    }
}

std::vector<SurfaceTri> extract_surface(const TetMesh& mesh)
{
    struct Entry {
        std::array<int, 3> key;
        int tet;
        int face;
    };
    std::vector<Entry> faces;
    faces.reserve(mesh.tets.size() * 4);
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive.empty() && !mesh.alive[t]) {
            continue;
        }
        for (int f = 0; f < 4; ++f) {
            Tri tri = tet_face(mesh.tets[t], f);
            std::sort(tri.begin(), tri.end());
            faces.push_back({tri, static_cast<int>(t), f});
        }
    }
    std::sort(faces.begin(), faces.end(), [](const Entry& a, const Entry& b) {
        if (a.key != b.key) {
            return a.key < b.key;
        }
        return a.tet < b.tet;
    });

    std::vector<SurfaceTri> out;
    for (std::size_t i = 0; i < faces.size();) {
        std::size_t j = i + 1;
        while (j < faces.size() && faces[j].key == faces[i].key) {
            ++j;
        }
        if (j - i == 1) {
            const auto& e = faces[i];
            out.push_back({tet_face(mesh.tets[e.tet], e.face), e.tet, e.face});
        }
        i = j;
    }
    std::sort(out.begin(), out.end(),
              [](const SurfaceTri& a, const SurfaceTri& b) { return a.face_id() < b.face_id(); });
    return out;
}

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d)
{
    return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double mesh_volume(const TetMesh& mesh, std::span<const Vec3> x)
{
    double v = 0.0;
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive[t]) {
            continue;
        }
        const Tet& k = mesh.tets[t];
        v += signed_tet_volume(x[k[0]], x[k[1]], x[k[2]], x[k[3]]);
    }
    return v;
}

double enclosed_volume(std::span<const SurfaceTri> surface, std::span<const Vec3> x)
{
    double v = 0.0;
    for (const auto& tri : surface) {
        const Vec3& a = x[tri.verts[0]];
        const Vec3& b = x[tri.verts[1]];
        const Vec3& c = x[tri.verts[2]];
        v += a.dot(b.cross(c));
    }
    return v / 6.0;
}

std::vector<std::vector<int>> vertex_surface_adjacency(const TetMesh& mesh)
{
    std::vector<std::vector<int>> adj(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.surface.size(); ++i) {
        for (int v : mesh.surface[i].verts) {
            adj[v].push_back(static_cast<int>(i));
        }
    }
    return adj;
}

std::vector<int> surface_vertices(const TetMesh& mesh)
{
    std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
    for (const auto& tri : mesh.surface) {
        for (int v : tri.verts) {
            used[v] = 1;
        }
    }
    std::vector<int> out;
    for (std::size_t v = 0; v < used.size(); ++v) {
        if (used[v]) {
            out.push_back(static_cast<int>(v));
        }
    }
    return out;
}

}  // namespace fetosim
