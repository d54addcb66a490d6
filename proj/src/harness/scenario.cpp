#include "fetosim/harness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace fetosim {

void PinSelection::apply(TetMesh& mesh) const
{
    for (int v : indices) {
        if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size()) {
            throw ValidationError("pinned vertex " + std::to_string(v) + " out of range");
        }
        mesh.pinned[v] = 1;
    }
    for (const auto& hs : half_spaces) {
        const Vec3 n = hs.normal.normalized();
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            if (n.dot(mesh.vertices[v]) >= hs.offset - 1e-9) {
                mesh.pinned[v] = 1;
            }
        }
    }
}

void Trajectory::add(int tool, const Keyframe& key)
{
    tracks_[tool].push_back(key);
}

double Trajectory::end_time() const
{
    double t = 0.0;
    for (const auto& [id, keys] : tracks_) {
        if (!keys.empty()) {
            t = std::max(t, keys.back().time);
        }
    }
    return t;
}

void Trajectory::validate() const
{
    for (const auto& [id, keys] : tracks_) {
        for (std::size_t i = 1; i < keys.size(); ++i) {
            if (!(keys[i].time > keys[i - 1].time)) {
                throw ValidationError("trajectory timestamps for tool " + std::to_string(id) +
                                      " are not strictly increasing at keyframe " + std::to_string(i));
            }
        }
    }
}

ToolPose Trajectory::sample(int tool, double time) const
{
    const auto& keys = tracks_.at(tool);
    if (keys.empty()) {
        throw ValidationError("empty trajectory for tool " + std::to_string(tool));
    }
    if (time <= keys.front().time) {
        return keys.front().pose;
    }
    if (time >= keys.back().time) {
        return keys.back().pose;
    }
    auto next = std::upper_bound(keys.begin(), keys.end(), time,
                                 [](double t, const Keyframe& k) { return t < k.time; });
    const Keyframe& b = *next;
    const Keyframe& a = *(next - 1);
    if (time == a.time) {
        return a.pose;
    }
    ToolPose p = interpolate(a.pose, b.pose, (time - a.time) / (b.time - a.time));
    p.active = a.pose.active;
    return p;
}

Trajectory read_trajectory_csv(std::istream& in, const std::map<int, ToolKind>& kinds)
{
    Trajectory traj;
    std::string line;
    int number = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (header) {
            header = false;
            if (line.rfind("time", 0) == 0) {
                continue;
            }
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double t = 0.0;
        int tool = 0;
        double v[8];
        int active = 0;
        row >> t >> tool;
        for (double& x : v) {
            row >> x;
        }
        row >> active;
        if (!row) {
            throw ParseError(number, "expected time,tool,px,py,pz,qw,qx,qy,qz,jaw,active");
        }
        std::string rest;
        if (row >> rest) {
            throw ParseError(number, "unexpected trailing field '" + rest + "'");
        }
        auto kind = kinds.find(tool);
        if (kind == kinds.end()) {
            throw ParseError(number, "trajectory references undeclared tool " + std::to_string(tool));
        }
        Keyframe key;
        key.time = t;
        key.pose.kind = kind->second;
        key.pose.position = Vec3(v[0], v[1], v[2]);
        key.pose.orientation = Quat(v[3], v[4], v[5], v[6]);
        key.pose.jaw = v[7];
        key.pose.active = active != 0;
        if (!key.pose.position.allFinite() || !std::isfinite(t) || !std::isfinite(v[7])) {
            throw ParseError(number, "non-finite value");
        }
        try {
            key.pose.sanitize();
        } catch (const ValidationError& e) {
            throw ParseError(number, e.what());
        }
        traj.add(tool, key);
    }
    return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory)
{
    out << "time,tool,px,py,pz,qw,qx,qy,qz,jaw,active\n";
    out.precision(17);
    for (const auto& [id, keys] : trajectory.tracks()) {
        for (const auto& k : keys) {
            const auto& p = k.pose;
            out << k.time << ',' << id << ',' << p.position.x() << ',' << p.position.y() << ','
                << p.position.z() << ',' << p.orientation.w() << ',' << p.orientation.x() << ','
                << p.orientation.y() << ',' << p.orientation.z() << ',' << p.jaw << ',' << (p.active ? 1 : 0)
                << '\n';
        }
    }
}

std::int64_t Scenario::frame_count() const
{
    return static_cast<std::int64_t>(std::llround(duration / config.solver.frame_dt));
}

void Scenario::validate() const
{
    if (!(duration > 0.0)) {
        throw ValidationError("duration must be positive");
    }
    if (mesh_path.has_value() == slab.has_value()) {
        throw ValidationError("exactly one of mesh.file and mesh.slab is required");
    }
    if (mesh_path && !std::filesystem::exists(*mesh_path)) {
        throw ValidationError("mesh file not found: " + mesh_path->string());
    }
    config.solver.validate();
    trajectory.validate();
    for (const auto& [id, keys] : trajectory.tracks()) {
        const bool declared = std::any_of(tools.begin(), tools.end(), [id = id](const ToolSpec& t) { return t.id == id; });
        if (!declared) {
            throw ValidationError("trajectory references undeclared tool " + std::to_string(id));
        }
    }
    for (std::size_t i = 0; i < tools.size(); ++i) {
        for (std::size_t j = i + 1; j < tools.size(); ++j) {
            if (tools[i].id == tools[j].id) {
                throw ValidationError("duplicate tool id " + std::to_string(tools[i].id));
            }
        }
    }
}

namespace {

int line_of(const YAML::Node& n)
{
    return n.Mark().line + 1;
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& what)
{
    throw ParseError(line_of(n), what);
}

template <typename T>
T get(const YAML::Node& n, const std::string& key)
{
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        fail(n, "invalid value for '" + key + "'");
    }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, T& out)
{
    if (const YAML::Node n = parent[key]) {
        out = get<T>(n, key);
    }
}

Vec3 vec3(const YAML::Node& n, const std::string& key)
{
    if (!n.IsSequence() || n.size() != 3) {
        fail(n, "'" + key + "' must be a list of 3 numbers");
    }
    Vec3 v(get<double>(n[0], key), get<double>(n[1], key), get<double>(n[2], key));
    if (!v.allFinite()) {
        fail(n, "'" + key + "' must be finite");
    }
    return v;
}

void read_vec3(const YAML::Node& parent, const char* key, Vec3& out)
{
    if (const YAML::Node n = parent[key]) {
        out = vec3(n, key);
    }
}

void check_keys(const YAML::Node& n, std::initializer_list<const char*> allowed, const std::string& section)
{
    if (!n.IsMap()) {
        fail(n, "'" + section + "' must be a mapping");
    }
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            fail(kv.first, "unknown key '" + key + "' in " + section);
        }
    }
}

/// `orientation: [w, x, y, z]` or `rotation: {axis: [..], angle_deg: a}`.
Quat orientation_of(const YAML::Node& n)
{
    if (const YAML::Node q = n["orientation"]) {
        if (!q.IsSequence() || q.size() != 4) {
            fail(q, "'orientation' must be [w, x, y, z]");
        }
        Quat out(get<double>(q[0], "orientation"), get<double>(q[1], "orientation"),
                 get<double>(q[2], "orientation"), get<double>(q[3], "orientation"));
        if (!(out.norm() > 1e-12) || !std::isfinite(out.norm())) {
            fail(q, "'orientation' quaternion is degenerate");
        }
        return out.normalized();
    }
    if (const YAML::Node r = n["rotation"]) {
        check_keys(r, {"axis", "angle_deg"}, "rotation");
        const Vec3 axis = vec3(r["axis"], "axis");
        if (!(axis.norm() > 1e-12)) {
            fail(r, "rotation axis is zero");
        }
        const double deg = r["angle_deg"] ? get<double>(r["angle_deg"], "angle_deg") : 0.0;
        return Quat(Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis.normalized()));
    }
    return Quat::Identity();
}

Isometry placement_of(const YAML::Node& n)
{
    Isometry t = Isometry::Identity();
    t.linear() = orientation_of(n).toRotationMatrix();
    Vec3 p = Vec3::Zero();
    read_vec3(n, "position", p);
    t.translation() = p;
    return t;
}

MaterialParams material_of(const YAML::Node& n)
{
    check_keys(n, {"young_modulus", "poisson_ratio", "density", "friction"}, "material");
    MaterialParams m;
    read(n, "young_modulus", m.young_modulus);
    read(n, "poisson_ratio", m.poisson_ratio);
    read(n, "density", m.density);
    read(n, "friction", m.friction_coeff);
    try {
        return MaterialParams::make(m.young_modulus, m.poisson_ratio, m.density, m.friction_coeff);
    } catch (const Error& e) {
        fail(n, e.what());
    }
}

SolverConfig solver_of(const YAML::Node& n)
{
    check_keys(n,
               {"frame_rate", "substeps", "iterations", "gravity", "velocity_damping", "max_speed", "deterministic",
                "parallel", "rest_correction", "hydrostatic_compliance_scale", "deviatoric_compliance_scale",
                "contact_compliance", "contact_margin"},
               "solver");
    SolverConfig s;
    if (const YAML::Node r = n["frame_rate"]) {
        const double hz = get<double>(r, "frame_rate");
        if (!(hz > 0.0)) {
            fail(r, "frame_rate must be positive");
        }
        s.frame_dt = 1.0 / hz;
    }
    read(n, "substeps", s.substeps);
    read(n, "iterations", s.iterations);
    read_vec3(n, "gravity", s.gravity);
    read(n, "velocity_damping", s.velocity_damping);
    read(n, "max_speed", s.max_speed_clamp);
    read(n, "deterministic", s.deterministic);
    read(n, "parallel", s.parallel_batches);
    read(n, "rest_correction", s.rest_correction);
    read(n, "hydrostatic_compliance_scale", s.hydrostatic_compliance_scale);
    read(n, "deviatoric_compliance_scale", s.deviatoric_compliance_scale);
    read(n, "contact_compliance", s.contact_compliance);
    read(n, "contact_margin", s.contact_margin);
    try {
        s.validate();
    } catch (const ValidationError& e) {
        fail(n, e.what());
    }
    return s;
}

ToolGeometry geometry_of(const YAML::Node& n)
{
    check_keys(n,
               {"shaft_radius", "shaft_length", "tip_radius", "jaw_length", "jaw_width", "jaw_thickness",
                "jaw_rounding", "max_aperture", "blend", "blade_radius"},
               "geometry");
    ToolGeometry g;
    read(n, "shaft_radius", g.shaft_radius);
    read(n, "shaft_length", g.shaft_length);
    read(n, "tip_radius", g.tip_radius);
    read(n, "jaw_length", g.jaw_length);
    read(n, "jaw_width", g.jaw_width);
    read(n, "jaw_thickness", g.jaw_thickness);
    read(n, "jaw_rounding", g.jaw_rounding);
    read(n, "max_aperture", g.max_aperture);
    read(n, "blend", g.blend);
    read(n, "blade_radius", g.blade_radius);
    return g;
}

SlabSpec slab_of(const YAML::Node& n)
{
    check_keys(n, {"size", "cells", "origin", "placode_radius", "position", "orientation", "rotation"}, "slab");
    SlabSpec s;
    read_vec3(n, "size", s.size);
    if (const YAML::Node c = n["cells"]) {
        if (!c.IsSequence() || c.size() != 3) {
            fail(c, "'cells' must be a list of 3 integers");
        }
        for (int a = 0; a < 3; ++a) {
            s.cells[a] = get<int>(c[a], "cells");
        }
    }
    s.origin = Vec3(-0.5 * s.size.x(), -0.5 * s.size.y(), 0.0);
    read_vec3(n, "origin", s.origin);
    read(n, "placode_radius", s.placode_radius);
    s.placement = placement_of(n);
    return s;
}

ToolPose pose_of(const YAML::Node& n, ToolKind kind)
{
    ToolPose p;
    p.kind = kind;
    read_vec3(n, "position", p.position);
    p.orientation = orientation_of(n);
    read(n, "jaw", p.jaw);
    read(n, "active", p.active);
    if (!std::isfinite(p.jaw)) {
        fail(n, "jaw must be finite");
    }
    p.sanitize();
    return p;
}

SdfShape obstacle_of(const YAML::Node& n)
{
    check_keys(n, {"type", "radius", "half_extents", "a", "b", "position", "orientation", "rotation"}, "obstacle");
    if (!n["type"]) {
        fail(n, "obstacle requires a 'type'");
    }
    const auto type = get<std::string>(n["type"], "type");
    double radius = 0.0;
    read(n, "radius", radius);
    SdfShape shape;
    try {
        if (type == "sphere") {
            shape = SdfShape::sphere(Vec3::Zero(), radius);
        } else if (type == "capsule") {
            Vec3 a = Vec3::Zero();
            Vec3 b = Vec3::UnitZ();
            read_vec3(n, "a", a);
            read_vec3(n, "b", b);
            shape = SdfShape::capsule(a, b, radius);
        } else if (type == "rounded_box" || type == "box") {
            Vec3 half(1.0, 1.0, 1.0);
            read_vec3(n, "half_extents", half);
            shape = SdfShape::rounded_box(half, radius);
        } else {
            fail(n["type"], "unknown obstacle type '" + type + "'");
        }
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        fail(n, e.what());
    }
    return SdfShape::posed(shape, placement_of(n));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ParseError(e.mark.line + 1, e.msg);
    }
    if (!root.IsMap()) {
        throw ParseError(1, "scenario must be a mapping");
    }
    check_keys(root,
               {"name", "duration", "output", "mesh", "material", "solver", "geometry", "pins", "tools",
                "trajectory", "obstacles", "diathermy", "cut", "grasp"},
               "scenario");

    Scenario s;
    s.base_dir = base_dir;
    read(root, "name", s.name);
    read(root, "duration", s.duration);
    if (const YAML::Node o = root["output"]) {
        s.output = resolve(base_dir, get<std::string>(o, "output"));
    }

    const YAML::Node mesh = root["mesh"];
    if (!mesh) {
        throw ParseError(1, "missing 'mesh' section");
    }
    check_keys(mesh, {"file", "slab"}, "mesh");
    if (const YAML::Node f = mesh["file"]) {
        s.mesh_path = resolve(base_dir, get<std::string>(f, "file"));
    }
    if (const YAML::Node slab = mesh["slab"]) {
        s.slab = slab_of(slab);
    }

    if (const YAML::Node n = root["material"]) {
        s.config.material = material_of(n);
    } else {
        const auto& m = s.config.material;
        s.config.material = MaterialParams::make(m.young_modulus, m.poisson_ratio, m.density, m.friction_coeff);
    }
    if (const YAML::Node n = root["solver"]) {
        s.config.solver = solver_of(n);
    }
    if (const YAML::Node n = root["geometry"]) {
        s.config.geometry = geometry_of(n);
    }
    if (const YAML::Node n = root["diathermy"]) {
        check_keys(n, {"rate", "threshold"}, "diathermy");
        read(n, "rate", s.config.diathermy.rate);
        read(n, "threshold", s.config.diathermy.threshold);
    }
    if (const YAML::Node n = root["cut"]) {
        check_keys(n, {"require_coagulation", "max_fraction"}, "cut");
        read(n, "require_coagulation", s.config.cut.require_coagulation);
        read(n, "max_fraction", s.config.cut.max_fraction);
    }
    if (const YAML::Node n = root["grasp"]) {
        check_keys(n, {"compliance", "dilation", "close_threshold", "open_threshold"}, "grasp");
        read(n, "compliance", s.config.grasp.compliance);
        read(n, "dilation", s.config.grasp.dilation);
        read(n, "close_threshold", s.config.grasp.close_threshold);
        read(n, "open_threshold", s.config.grasp.open_threshold);
    }

    if (const YAML::Node pins = root["pins"]) {
        check_keys(pins, {"indices", "half_spaces"}, "pins");
        read(pins, "indices", s.pins.indices);
        if (const YAML::Node hs = pins["half_spaces"]) {
            if (!hs.IsSequence()) {
                fail(hs, "'half_spaces' must be a list");
            }
            for (const auto& h : hs) {
                check_keys(h, {"normal", "offset"}, "half_space");
                HalfSpace half;
                read_vec3(h, "normal", half.normal);
                read(h, "offset", half.offset);
                if (!(half.normal.norm() > 1e-12)) {
                    fail(h, "half-space normal is zero");
                }
                s.pins.half_spaces.push_back(half);
            }
        }
    }

    std::map<int, ToolKind> kinds;
    if (const YAML::Node tools = root["tools"]) {
        if (!tools.IsSequence()) {
            fail(tools, "'tools' must be a list");
        }
        for (const auto& t : tools) {
            check_keys(t, {"id", "kind", "position", "orientation", "rotation", "jaw", "active", "collide"}, "tool");
            ToolSpec spec;
            read(t, "id", spec.id);
            if (!t["kind"]) {
                fail(t, "tool requires a 'kind'");
            }
            ToolKind kind;
            try {
                kind = tool_kind_from_string(get<std::string>(t["kind"], "kind"));
            } catch (const ValidationError& e) {
                fail(t["kind"], e.what());
            }
            spec.pose = pose_of(t, kind);
            read(t, "collide", spec.collide);
            kinds[spec.id] = kind;
            s.tools.push_back(spec);
        }
    }

    if (const YAML::Node obstacles = root["obstacles"]) {
        if (!obstacles.IsSequence()) {
            fail(obstacles, "'obstacles' must be a list");
        }
        for (const auto& o : obstacles) {
            s.obstacles.push_back(obstacle_of(o));
        }
    }

    if (const YAML::Node traj = root["trajectory"]) {
        check_keys(traj, {"file", "keyframes"}, "trajectory");
        if (const YAML::Node f = traj["file"]) {
            const auto path = resolve(base_dir, get<std::string>(f, "file"));
            std::ifstream in(path);
            if (!in) {
                fail(f, "cannot open trajectory file " + path.string());
            }
            s.trajectory = read_trajectory_csv(in, kinds);
        }
        if (const YAML::Node keys = traj["keyframes"]) {
            if (!keys.IsSequence()) {
                fail(keys, "'keyframes' must be a list");
            }
            for (const auto& k : keys) {
                check_keys(k, {"time", "tool", "position", "orientation", "rotation", "jaw", "active"}, "keyframe");
                Keyframe key;
                int tool = 0;
                read(k, "time", key.time);
                read(k, "tool", tool);
                auto kind = kinds.find(tool);
                if (kind == kinds.end()) {
                    fail(k, "keyframe references undeclared tool " + std::to_string(tool));
                }
                key.pose = pose_of(k, kind->second);
                s.trajectory.add(tool, key);
            }
        }
    }

    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open scenario " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    Scenario s = parse_scenario(buffer.str(), path.parent_path());
    if (s.name.empty()) {
        s.name = path.stem().string();
    }
    return s;
}

TetMesh build_mesh(const Scenario& scenario)
{
    TetMesh mesh = scenario.mesh_path ? load_mesh_file(*scenario.mesh_path) : make_slab(*scenario.slab);
    scenario.pins.apply(mesh);
    return mesh;
}

Simulation make_simulation(const Scenario& scenario)
{
    Simulation sim(build_mesh(scenario), scenario.config);
    for (const auto& t : scenario.tools) {
        sim.add_tool(t.id, t.pose, t.collide);
    }
    for (const auto& o : scenario.obstacles) {
        sim.add_obstacle(o);
    }
    return sim;
}

}  // namespace fetosim
