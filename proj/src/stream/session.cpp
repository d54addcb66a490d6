#include "fetosim/stream/session.hpp"

namespace fetosim {

void Mailbox::post(const SessionMessage& message)
{
    std::lock_guard lock(mutex_);
    if (message.type == MessageType::Pose) {
        pending_.poses[message.tool] = message;
        return;
    }
    if (message.type == MessageType::Reset) {
        pending_.poses.clear();
    }
    pending_.controls.push_back(message);
}

Mailbox::Batch Mailbox::take()
{
    std::lock_guard lock(mutex_);
    Batch out = std::move(pending_);
    pending_ = {};
    return out;
}

Session::Session(const Scenario& scenario) : scenario_(scenario), sim_(make_simulation(scenario))
{
    last_.volume_ratio = 1.0;
}

void Session::apply(const SessionMessage& m)
{
    if (m.type == MessageType::Reset) {
        sim_.reset();
        last_ = {};
        ++generation_;
        return;
    }
    if (!sim_.has_tool(m.tool)) {
        throw ValidationError("unknown tool id " + std::to_string(m.tool));
    }
    const Simulation::Tool& tool = sim_.tools().at(m.tool);
    switch (m.type) {
    case MessageType::Pose: {
        ToolPose p = tool.target;
        p.position = *m.position;
        p.orientation = *m.orientation;
        if (m.jaw) {
            p.jaw = *m.jaw;
        }
        if (m.active) {
            p.active = *m.active;
        }
        sim_.set_tool_target(m.tool, p);
        break;
    }
    case MessageType::Event: {
        ToolPose p = tool.target;
        if (m.jaw) {
            p.jaw = *m.jaw;
        }
        if (m.active) {
            p.active = *m.active;
        }
        sim_.set_tool_target(m.tool, p);
        break;
    }
    case MessageType::SelectTool: sim_.set_tool_kind(m.tool, *m.kind); break;
    case MessageType::Reset: break;
    }
}

std::vector<std::string> Session::apply_pending()
{
    std::vector<std::string> errors;
    Mailbox::Batch batch = mailbox_.take();
    auto guarded = [&](const SessionMessage& m) {
        try {
            apply(m);
        } catch (const Error& e) {
            errors.emplace_back(e.what());
        }
    };
    for (const auto& m : batch.controls) {
        guarded(m);
    }
    for (const auto& [id, m] : batch.poses) {
        guarded(m);
    }
    return errors;
}

FrameTelemetry Session::step(std::vector<std::string>* errors)
{
    auto e = apply_pending();
    if (errors) {
        *errors = std::move(e);
    }
    last_ = sim_.step_frame();
    return last_;
}

Snapshot Session::snapshot(bool include_indices) const
{
    const TetMesh& mesh = sim_.mesh();
    const auto& x = sim_.state().x;
    Snapshot s;
    s.frame = static_cast<std::uint64_t>(sim_.frame());
    s.time = sim_.time();
    s.topology_version = sim_.topology_version();
    s.triangle_count = static_cast<std::uint32_t>(mesh.surface.size());
    s.volume_ratio = static_cast<float>(last_.volume_ratio);
    s.contact_count = static_cast<std::uint32_t>(last_.contact_count);

    const std::vector<int> verts = surface_vertices(mesh);
    std::vector<std::uint32_t> local(mesh.vertices.size(), 0);
    s.positions.reserve(3 * verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i) {
        local[verts[i]] = static_cast<std::uint32_t>(i);
        for (int a = 0; a < 3; ++a) {
            s.positions.push_back(static_cast<float>(x[verts[i]][a]));
        }
    }
    if (include_indices) {
        std::vector<std::uint32_t> indices;
        indices.reserve(3 * mesh.surface.size());
        for (const auto& tri : mesh.surface) {
            for (int v : tri.verts) {
                indices.push_back(local[v]);
            }
        }
        s.indices = std::move(indices);
    }
    s.coagulated = sim_.coagulation().surface_flags(mesh);

    for (const auto& [id, tool] : sim_.tools()) {
        ToolRecord r;
        r.id = static_cast<std::uint32_t>(id);
        r.kind = tool.pose.kind;
        r.active = tool.pose.active;
        r.force = static_cast<float>(tool.telemetry.force.norm());
        for (int a = 0; a < 3; ++a) {
            r.position[a] = static_cast<float>(tool.pose.position[a]);
        }
        const Quat& q = tool.pose.orientation;
        r.orientation = {static_cast<float>(q.w()), static_cast<float>(q.x()), static_cast<float>(q.y()),
                         static_cast<float>(q.z())};
        r.jaw = static_cast<float>(tool.pose.jaw);
        s.tools.push_back(r);
    }
    return s;
}

std::string Session::hello(double snapshot_rate) const
{
    std::vector<HelloTool> tools;
    for (const auto& [id, tool] : sim_.tools()) {
        tools.push_back({id, tool.pose.kind});
    }
    return hello_message(scenario_.name, tools, snapshot_rate, 1.0 / scenario_.config.solver.frame_dt);
}

}  // namespace fetosim
