#include "fetosim/simulation.hpp"

#include <algorithm>
#include <chrono>

namespace fetosim {

Simulation::Simulation(TetMesh mesh, SimulationConfig config) : config_(std::move(config)), mesh_(std::move(mesh))
{
    config_.solver.validate();
    vertex_masses_from_density(mesh_, config_.material.density);
    initial_mesh_ = mesh_;
    state_ = SolverState::from_mesh(mesh_);
    solver_ = Solver(mesh_, config_.material, config_.solver);
    coagulation_ = CoagulationState(mesh_.tets.size(), config_.diathermy.threshold);
    initial_mass_ = config_.material.density * mesh_.alive_rest_volume();
    rebuild_topology();
}

void Simulation::add_tool(int id, const ToolPose& pose, bool collide)
{
    ToolPose p = pose;
    p.sanitize();
    Tool tool;
    tool.id = id;
    tool.pose = p;
    tool.target = p;
    tool.collide = collide;
    tool.telemetry.id = id;
    tools_[id] = tool;
    initial_tools_[id] = tool;
}

void Simulation::set_tool_target(int id, const ToolPose& target)
{
    auto it = tools_.find(id);
    if (it == tools_.end()) {
        throw ValidationError("unknown tool id " + std::to_string(id));
    }
    ToolPose p = target;
    p.sanitize();
    it->second.target = p;
}

void Simulation::set_tool_kind(int id, ToolKind kind)
{
    auto it = tools_.find(id);
    if (it == tools_.end()) {
        throw ValidationError("unknown tool id " + std::to_string(id));
    }
    Tool& tool = it->second;
    for (const auto& h : tool.grasp.held) {
        solver_.attachments().remove(h.handle);
    }
    tool.grasp = {};
    tool.armed = false;
    tool.pose.kind = kind;
    tool.target.kind = kind;
}

void Simulation::add_obstacle(const SdfShape& shape)
{
    obstacles_.push_back(shape);
}

double Simulation::alive_mass() const
{
    return config_.material.density * mesh_.alive_rest_volume();
}

void Simulation::rebuild_topology()
{
    elements_ = surface_collision_elements(mesh_);
    vertex_triangles_ = vertex_surface_adjacency(mesh_);
    bvh_ = elements_.empty() ? Bvh{} : Bvh::build(elements_, state_.x);
}

void Simulation::detect(const SolverState& state, std::vector<Contact>& contacts, std::vector<ContactBody>& bodies)
{
    if (elements_.empty()) {
        return;
    }
    bvh_.refit(elements_, state.x);
    const double margin = config_.solver.contact_margin;
    for (std::size_t i = 0; i < substep_poses_.size(); ++i) {
        const auto& [id, pose] = substep_poses_[i];
        const ToolPose& before = previous_poses_[i].second;
        ContactBody body;
        body.shape = tool_sdf(pose, config_.geometry);
        body.motion = pose.transform() * before.transform().inverse();
        bodies.push_back(body);

        const Tool& tool = tools_.at(id);
        if (!tool.collide) {
            continue;
        }
        const std::size_t first = contacts.size();
        generate_contacts(bvh_, elements_, state.x, body.shape, margin, static_cast<int>(i), contacts,
                          config_.solver.parallel_batches);

        if (tool.grasp.closed && !tool.grasp.held.empty()) {
            std::vector<int> held;
            for (const auto& h : tool.grasp.held) {
                held.push_back(h.vertex);
            }
            std::sort(held.begin(), held.end());
            auto holds = [&](const Contact& c) {
                for (int k = 0; k < c.count(); ++k) {
                    if (std::binary_search(held.begin(), held.end(), c.verts[k])) {
                        return true;
                    }
                }
                return false;
            };
            contacts.erase(std::remove_if(contacts.begin() + static_cast<std::ptrdiff_t>(first), contacts.end(), holds),
                           contacts.end());
        }
    }
    for (const auto& shape : obstacles_) {
        const int index = static_cast<int>(bodies.size());
        bodies.push_back({shape, Isometry::Identity()});
        generate_contacts(bvh_, elements_, state.x, shape, margin, index, contacts, config_.solver.parallel_batches);
    }
}

void Simulation::apply_tool_events(Tool& tool, const ToolPose& pose, FrameTelemetry& telemetry)
{
    if (pose.kind == ToolKind::Scissors) {
        if (!pose.active) {
            tool.armed = false;
        } else if (pose.jaw > 0.5) {
            tool.armed = true;
        } else if (tool.armed && pose.jaw < 0.1) {
            tool.armed = false;
            CutResult cut = apply_scissors_cut(pose, config_.geometry, mesh_, state_, coagulation_, config_.cut,
                                               config_.material.density);
            if (cut.rejected) {
                ++telemetry.rejected_cuts;
                cut_log_.push_back(std::move(cut));
            } else if (!cut.removed_tets.empty()) {
                removed_mass_ += cut.removed_mass;
                ++topology_version_;
                ++telemetry.cuts;
                rebuild_topology();
                solver_.rebuild(mesh_);
                cut_log_.push_back(std::move(cut));
            }
        }
    } else if (pose.kind == ToolKind::Grasper) {
        apply_grasper(pose, config_.geometry, mesh_, state_.x, solver_.attachments(), tool.grasp, config_.grasp);
    }
}

FrameTelemetry Simulation::step_frame()
{
    using clock = std::chrono::steady_clock;
    const int n = config_.solver.substeps;
    const double dt = config_.solver.substep_dt();

    FrameTelemetry telemetry;
    telemetry.frame = frame_ + 1;

    std::vector<std::pair<int, ToolPose>> frame_start;
    for (const auto& [id, tool] : tools_) {
        frame_start.emplace_back(id, tool.pose);
    }

    double wall = 0.0;
    for (int s = 1; s <= n; ++s) {
        const auto t0 = clock::now();
        const double frac = static_cast<double>(s) / n;

        previous_poses_.clear();
        substep_poses_.clear();
        for (const auto& [id, start] : frame_start) {
            Tool& tool = tools_.at(id);
            const ToolPose pose = interpolate(start, tool.target, frac);
            previous_poses_.emplace_back(id, tool.pose);
            substep_poses_.emplace_back(id, pose);
            apply_tool_events(tool, pose, telemetry);
        }

        const SubstepStats stats = solver_.substep(
            state_, mesh_, dt,
            [this](const SolverState& st, std::vector<Contact>& c, std::vector<ContactBody>& b) { detect(st, c, b); });
        telemetry.degenerate += stats.degenerate;
        telemetry.contact_count = stats.contacts;

        const auto& contacts = solver_.contacts();
        for (std::size_t i = 0; i < substep_poses_.size(); ++i) {
            const auto& [id, pose] = substep_poses_[i];
            Tool& tool = tools_.at(id);
            tool.pose = pose;

            std::vector<Contact> mine;
            Vec3 force = Vec3::Zero();
            for (const auto& c : contacts) {
                if (c.tool == static_cast<int>(i)) {
                    mine.push_back(c);
                    force -= contact_force(c, dt);
                }
            }
            for (const auto& h : tool.grasp.held) {
                force -= solver_.attachments().force(h.handle, dt);
            }
            tool.telemetry.force = force;
            tool.telemetry.contacts = static_cast<int>(mine.size());
            tool.telemetry.attachments = static_cast<int>(tool.grasp.held.size());
            apply_diathermy(pose, mine, mesh_, vertex_triangles_, dt, config_.diathermy, coagulation_);
        }
        wall += std::chrono::duration<double>(clock::now() - t0).count();
    }

    ++frame_;
    time_ = static_cast<double>(frame_) * config_.solver.frame_dt;

    telemetry.time = time_;
    telemetry.mean_substep_seconds = wall / n;
    telemetry.elastic_residual = solver_.elastic().residual(mesh_, state_.x);
    telemetry.volume = mesh_volume(mesh_, state_.x);
    const double rest = mesh_.alive_rest_volume();
    telemetry.volume_ratio = rest > 0.0 ? telemetry.volume / rest : 1.0;
    telemetry.kinetic_energy = kinetic_energy(mesh_, state_.v);
    telemetry.removed_mass = removed_mass_;
    telemetry.position_hash = position_hash(state_.x);
    for (const auto& [id, tool] : tools_) {
        telemetry.tools.push_back(tool.telemetry);
    }
    return telemetry;
}

void Simulation::reset()
{
    mesh_ = initial_mesh_;
    state_ = SolverState::from_mesh(mesh_);
    solver_ = Solver(mesh_, config_.material, config_.solver);
    coagulation_ = CoagulationState(mesh_.tets.size(), config_.diathermy.threshold);
    tools_ = initial_tools_;
    frame_ = 0;
    time_ = 0.0;
    topology_version_ = 0;
    removed_mass_ = 0.0;
    cut_log_.clear();
    rebuild_topology();
}

}  // namespace fetosim
