#include "fetosim/tools.hpp"

#include <algorithm>
#include <numeric>

namespace fetosim {

std::string to_string(ToolKind kind)
{
    switch (kind) {
    case ToolKind::Diathermy: return "diathermy";
    case ToolKind::Scissors: return "scissors";
    case ToolKind::Grasper: return "grasper";
    }
    return "unknown";
}

ToolKind tool_kind_from_string(const std::string& name)
{
    if (name == "diathermy") {
        return ToolKind::Diathermy;
    }
    if (name == "scissors") {
        return ToolKind::Scissors;
    }
    if (name == "grasper") {
        return ToolKind::Grasper;
    }
    throw ValidationError("unknown tool kind '" + name + "'");
}

Isometry ToolPose::transform() const
{
    Isometry t = Isometry::Identity();
    t.linear() = orientation.normalized().toRotationMatrix();
    t.translation() = position;
    return t;
}

void ToolPose::sanitize()
{
    const double n = orientation.norm();
    if (!(n > 1e-12) || !std::isfinite(n)) {
        throw ValidationError("tool orientation quaternion is degenerate");
    }
    orientation.coeffs() /= n;
    jaw = std::clamp(jaw, 0.0, 1.0);
}

ToolPose interpolate(const ToolPose& a, const ToolPose& b, double t)
{
    if (t <= 0.0) {
        return a;
    }
    if (t >= 1.0) {
        return b;
    }
    ToolPose p = b;
    p.position = (1.0 - t) * a.position + t * b.position;
    p.jaw = (1.0 - t) * a.jaw + t * b.jaw;
    Quat qb = b.orientation;
    if (a.orientation.dot(qb) < 0.0) {
        qb.coeffs() = -qb.coeffs();
    }
    p.orientation = a.orientation.slerp(t, qb).normalized();
    return p;
}

namespace {

SdfShape jaws_local(const ToolGeometry& g, double jaw)
{
    const Vec3 half(0.5 * g.jaw_width, 0.5 * g.jaw_thickness, 0.5 * g.jaw_length);
    const double offset = 0.5 * std::clamp(jaw, 0.0, 1.0) * g.max_aperture;
    auto at = [&](double y) {
        Isometry t = Isometry::Identity();
        t.translation() = Vec3(0.0, y, 0.5 * g.jaw_length);
        return SdfShape::posed(SdfShape::rounded_box(half, g.jaw_rounding), t);
    };
    return SdfShape::make_union({at(-offset), at(offset)});
}

}  // namespace

SdfShape tool_sdf(const ToolPose& pose, const ToolGeometry& g)
{
    SdfShape local;
    if (pose.kind == ToolKind::Diathermy) {
        local = SdfShape::make_union({SdfShape::sphere(Vec3::Zero(), g.tip_radius),
                                      SdfShape::capsule(Vec3::Zero(), Vec3(0.0, 0.0, g.shaft_length),
                                                        g.shaft_radius)});
    } else {
        const SdfShape shaft = SdfShape::capsule(Vec3(0.0, 0.0, g.jaw_length),
                                                 Vec3(0.0, 0.0, g.jaw_length + g.shaft_length), g.shaft_radius);
        local = SdfShape::smooth_union(jaws_local(g, pose.jaw), shaft, g.blend);
    }
    return SdfShape::posed(local, pose.transform());
}

SdfShape jaw_sdf(const ToolPose& pose, const ToolGeometry& g, double jaw)
{
    return SdfShape::posed(jaws_local(g, jaw), pose.transform());
}

SdfShape blade_sdf(const ToolPose& pose, const ToolGeometry& g)
{
    return SdfShape::posed(SdfShape::capsule(Vec3::Zero(), Vec3(0.0, 0.0, g.jaw_length), g.blade_radius),
                           pose.transform());
}

void CoagulationState::add(int face_id, double amount)
{
    if (amount > 0.0) {
        energy_[face_id] += amount;
    }
}

std::size_t CoagulationState::coagulated_count() const
{
    return static_cast<std::size_t>(
        std::count_if(energy_.begin(), energy_.end(), [this](double e) { return e >= threshold_; }));
}

std::vector<std::uint8_t> CoagulationState::surface_flags(const TetMesh& mesh) const
{
    std::vector<std::uint8_t> flags(mesh.surface.size(), 0);
    for (std::size_t i = 0; i < mesh.surface.size(); ++i) {
        flags[i] = coagulated(mesh.surface[i].face_id()) ? 1 : 0;
    }
    return flags;
}

std::vector<std::uint8_t> CoagulationState::coagulated_vertices(const TetMesh& mesh) const
{
    std::vector<std::uint8_t> out(mesh.vertices.size(), 0);
    for (std::size_t face = 0; face < energy_.size(); ++face) {
        if (energy_[face] < threshold_) {
            continue;
        }
        const int tet = static_cast<int>(face / 4);
        const Tri tri = tet_face(mesh.tets[tet], static_cast<int>(face % 4));
        for (int v : tri) {
            out[v] = 1;
        }
    }
    return out;
}

std::vector<int> touched_triangles(std::span<const Contact> contacts,
                                   std::span<const std::vector<int>> vertex_triangles)
{
    std::vector<int> out;
    for (const auto& c : contacts) {
        if (c.kind == ElementKind::Triangle && c.tri >= 0) {
            out.push_back(c.tri);
        } else if (c.kind == ElementKind::Vertex) {
            const auto& tris = vertex_triangles[c.verts[0]];
            out.insert(out.end(), tris.begin(), tris.end());
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void apply_diathermy(const ToolPose& pose, std::span<const Contact> contacts, const TetMesh& mesh,
                     std::span<const std::vector<int>> vertex_triangles, double dt,
                     const DiathermyConfig& config, CoagulationState& state)
{
    if (pose.kind != ToolKind::Diathermy || !pose.active || contacts.empty()) {
        return;
    }
    for (int tri : touched_triangles(contacts, vertex_triangles)) {
        state.add(mesh.surface[tri].face_id(), config.rate * dt);
    }
}

std::vector<int> cut_candidates(const ToolPose& pose, const ToolGeometry& geometry, const TetMesh& mesh,
                                std::span<const Vec3> x, const CoagulationState& coagulation,
                                const CutConfig& config)
{
    const SdfShape blade = blade_sdf(pose, geometry);
    const Aabb blade_box = blade.bounds();
    std::vector<std::uint8_t> hot;
    if (config.require_coagulation) {
        hot = coagulation.coagulated_vertices(mesh);
    }

    std::vector<int> out;
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive[t]) {
            continue;
        }
        const Tet& k = mesh.tets[t];
        if (config.require_coagulation && !(hot[k[0]] || hot[k[1]] || hot[k[2]] || hot[k[3]])) {
            continue;
        }
        const std::array<Vec3, 4> verts{x[k[0]], x[k[1]], x[k[2]], x[k[3]]};
        Aabb box = Aabb::of_point(verts[0]);
        for (int i = 1; i < 4; ++i) {
            box.expand(verts[i]);
        }
        if (!box.overlaps(blade_box)) {
            continue;
        }
        if (closest_point_element_sdf(verts, blade).phi < 0.0) {
            out.push_back(static_cast<int>(t));
        }
    }
    return out;
}

CutResult apply_scissors_cut(const ToolPose& pose, const ToolGeometry& geometry, TetMesh& mesh,
                             SolverState& state, const CoagulationState& coagulation, const CutConfig& config,
                             double density)
{
    CutResult result;
    std::vector<int> cut = cut_candidates(pose, geometry, mesh, state.x, coagulation, config);
    if (cut.empty()) {
        return result;
    }
    const auto alive = static_cast<double>(mesh.alive_count());
    if (static_cast<double>(cut.size()) > config.max_fraction * alive) {
        result.rejected = true;
        result.diagnostic = "cut rejected: would remove " + std::to_string(cut.size()) + " of " +
                            std::to_string(static_cast<std::size_t>(alive)) + " alive tets";
        return result;
    }
    for (int t : cut) {
        mesh.alive[t] = 0;
        result.removed_mass += density * mesh.rest_volume[t];
    }
    result.removed_tets = std::move(cut);
    mesh.surface = extract_surface(mesh);
    vertex_masses_from_density(mesh, density);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (mesh.inv_mass[v] == 0.0) {
            state.v[v].setZero();
        }
    }
    return result;
}

std::vector<Attachments::Handle> apply_grasper(const ToolPose& pose, const ToolGeometry& geometry,
                                               const TetMesh& mesh, std::span<const Vec3> x,
                                               Attachments& attachments, GraspState& grasp,
                                               const GraspConfig& config)
{
    std::vector<Attachments::Handle> created;
    if (pose.kind != ToolKind::Grasper) {
        return created;
    }
    const Isometry frame = pose.transform();

    if (grasp.closed && pose.jaw > config.open_threshold) {
        for (const auto& h : grasp.held) {
            attachments.remove(h.handle);
        }
        grasp.held.clear();
        grasp.closed = false;
        return created;
    }

    if (!grasp.closed && pose.jaw < config.close_threshold) {
        grasp.closed = true;
        const SdfShape region = jaw_sdf(pose, geometry, 0.0);
        const Aabb box = region.bounds().inflated(config.dilation);
        for (int v : surface_vertices(mesh)) {
            if (mesh.inv_mass[v] <= 0.0 || !box.overlaps(Aabb::of_point(x[v]))) {
                continue;
            }
            if (region.distance(x[v]) < config.dilation) {
                const auto h = attachments.add(mesh, v, x[v], config.compliance);
                grasp.held.push_back({h, v, frame.inverse() * x[v]});
                created.push_back(h);
            }
        }
        return created;
    }

    if (grasp.closed) {
        for (const auto& h : grasp.held) {
            attachments.set_target(h.handle, frame * h.local);
        }
    }
    return created;
}

int alive_components(const TetMesh& mesh, std::vector<int>* labels)
{
    std::vector<int> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive[t]) {
            continue;
        }
        const int root = find(mesh.tets[t][0]);
        for (int k = 1; k < 4; ++k) {
            const int r = find(mesh.tets[t][k]);
            if (r != root) {
                parent[r] = root;
            }
        }
    }

    std::vector<int> component_of_root(mesh.vertices.size(), -1);
    int count = 0;
    if (labels) {
        labels->assign(mesh.tets.size(), -1);
    }
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive[t]) {
            continue;
        }
        const int root = find(mesh.tets[t][0]);
        if (component_of_root[root] < 0) {
            component_of_root[root] = count++;
        }
        if (labels) {
            (*labels)[t] = component_of_root[root];
        }
    }
    return count;
}

}  // namespace fetosim
