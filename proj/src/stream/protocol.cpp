#include "fetosim/stream/protocol.hpp"

#include <bit>
#include <cmath>

#include <nlohmann/json.hpp>

namespace fetosim {

namespace {

class Writer {
public:
    explicit Writer(std::size_t reserve) { bytes_.reserve(reserve); }

    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void pad4()
    {
        while (bytes_.size() % 4 != 0) {
            bytes_.push_back(0);
        }
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const
    {
        if (bytes_.size() - pos_ < n) {
            throw DecodeError(std::string("snapshot truncated in ") + what);
        }
    }
    std::uint8_t u8() { return bytes_[pos_++]; }
    std::uint32_t u32()
    {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64()
    {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void pad4(const char* what)
    {
        const std::size_t pad = (4 - pos_ % 4) % 4;
        need(pad, what);
        pos_ += pad;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t kind_bits(ToolKind kind)
{
    switch (kind) {
    case ToolKind::Diathermy: return 0;
    case ToolKind::Scissors: return 1;
    case ToolKind::Grasper: return 2;
    }
    return 0;
}

ToolKind kind_from_bits(std::uint32_t bits)
{
    switch (bits & 3u) {
    case 0: return ToolKind::Diathermy;
    case 1: return ToolKind::Scissors;
    case 2: return ToolKind::Grasper;
    default: throw DecodeError("unknown tool kind in snapshot");
    }
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const Snapshot& s)
{
    if (s.positions.size() % 3 != 0) {
        throw ValidationError("snapshot positions must be xyz triples");
    }
    if (s.coagulated.size() != s.triangle_count) {
        throw ValidationError("snapshot needs one coagulation flag per triangle");
    }
    if (s.indices && s.indices->size() != 3ull * s.triangle_count) {
        throw ValidationError("snapshot index list does not match the triangle count");
    }
    const auto v = static_cast<std::uint32_t>(s.vertex_count());
    if (s.indices) {
        for (std::uint32_t i : *s.indices) {
            if (i >= v) {
                throw ValidationError("snapshot index references a vertex outside the snapshot");
            }
        }
    }

    Writer w(kSnapshotHeaderBytes + 4 * s.positions.size() + (s.indices ? 4 * s.indices->size() : 0) +
             s.coagulated.size() + 4 + kToolRecordBytes * s.tools.size());
    for (char c : {'F', 'S', 'N', 'P'}) {
        w.u8(static_cast<std::uint8_t>(c));
    }
    w.u32(kSnapshotLayout);
    w.u64(s.frame);
    w.f64(s.time);
    w.u32(s.topology_version);
    w.u32(s.indices ? kSnapshotHasIndices : 0u);
    w.u32(v);
    w.u32(s.triangle_count);
    w.u32(static_cast<std::uint32_t>(s.tools.size()));
    w.f32(s.volume_ratio);
    w.u32(s.contact_count);
    for (float p : s.positions) {
        w.f32(p);
    }
    if (s.indices) {
        for (std::uint32_t i : *s.indices) {
            w.u32(i);
        }
    }
    for (std::uint8_t c : s.coagulated) {
        w.u8(c);
    }
    w.pad4();
    for (const auto& t : s.tools) {
        w.u32(t.id);
        w.u32(kind_bits(t.kind) | (t.active ? 4u : 0u));
        w.f32(t.force);
        for (float p : t.position) {
            w.f32(p);
        }
        for (float q : t.orientation) {
            w.f32(q);
        }
        w.f32(t.jaw);
    }
    return w.take();
}

Snapshot decode_snapshot(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    r.need(kSnapshotHeaderBytes, "header");
    const char magic[4] = {static_cast<char>(r.u8()), static_cast<char>(r.u8()), static_cast<char>(r.u8()),
                           static_cast<char>(r.u8())};
    if (std::string_view(magic, 4) != "FSNP") {
        throw DecodeError("bad snapshot tag");
    }
    if (const std::uint32_t layout = r.u32(); layout != kSnapshotLayout) {
        throw DecodeError("unsupported snapshot layout " + std::to_string(layout));
    }
    Snapshot s;
    s.frame = r.u64();
    s.time = r.f64();
    s.topology_version = r.u32();
    const std::uint32_t flags = r.u32();
    if (flags & ~kSnapshotHasIndices) {
        throw DecodeError("unknown snapshot flags");
    }
    const std::uint64_t v = r.u32();
    s.triangle_count = r.u32();
    const std::uint64_t k = r.u32();
    s.volume_ratio = r.f32();
    s.contact_count = r.u32();
    const std::uint64_t t = s.triangle_count;

    r.need(12 * v, "positions");
    s.positions.resize(3 * v);
    for (float& p : s.positions) {
        p = r.f32();
    }
    if (flags & kSnapshotHasIndices) {
        r.need(12 * t, "indices");
        std::vector<std::uint32_t> indices(3 * t);
        for (auto& i : indices) {
            i = r.u32();
            if (i >= v) {
                throw DecodeError("snapshot index out of range");
            }
        }
        s.indices = std::move(indices);
    }
    r.need(t, "coagulation flags");
    s.coagulated.resize(t);
    for (auto& c : s.coagulated) {
        c = r.u8();
    }
    r.pad4("coagulation padding");
    r.need(kToolRecordBytes * k, "tool records");
    s.tools.resize(k);
    for (auto& tool : s.tools) {
        tool.id = r.u32();
        const std::uint32_t bits = r.u32();
        tool.kind = kind_from_bits(bits);
        tool.active = (bits & 4u) != 0;
        tool.force = r.f32();
        for (float& p : tool.position) {
            p = r.f32();
        }
        for (float& q : tool.orientation) {
            q = r.f32();
        }
        tool.jaw = r.f32();
    }
    if (r.remaining() != 0) {
        throw DecodeError("trailing bytes after snapshot");
    }
    return s;
}

namespace {

using nlohmann::json;

double finite_number(const json& j, const char* field)
{
    if (!j.is_number()) {
        throw DecodeError(std::string("field '") + field + "' must be a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw DecodeError(std::string("field '") + field + "' must be finite");
    }
    return v;
}

std::vector<double> numbers(const json& j, const char* field, std::size_t n)
{
    if (!j.is_array() || j.size() != n) {
        throw DecodeError(std::string("field '") + field + "' must be an array of " + std::to_string(n) +
                          " numbers");
    }
    std::vector<double> out;
    for (const auto& e : j) {
        out.push_back(finite_number(e, field));
    }
    return out;
}

}  // namespace

SessionMessage decode_message(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DecodeError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw DecodeError("message must be a JSON object");
    }
    auto type = j.find("type");
    if (type == j.end() || !type->is_string()) {
        throw DecodeError("message has no type tag");
    }
    SessionMessage m;
    const auto tag = type->get<std::string>();
    if (tag == "pose") {
        m.type = MessageType::Pose;
    } else if (tag == "event") {
        m.type = MessageType::Event;
    } else if (tag == "select_tool") {
        m.type = MessageType::SelectTool;
    } else if (tag == "reset") {
        m.type = MessageType::Reset;
    } else {
        throw DecodeError("unknown message type '" + tag + "'");
    }

    if (auto it = j.find("tool"); it != j.end()) {
        if (!it->is_number_integer()) {
            throw DecodeError("field 'tool' must be an integer");
        }
        m.tool = it->get<int>();
    }
    if (auto it = j.find("t"); it != j.end()) {
        m.client_time_ms = finite_number(*it, "t");
    }
    if (auto it = j.find("position"); it != j.end()) {
        const auto p = numbers(*it, "position", 3);
        m.position = Vec3(p[0], p[1], p[2]);
    }
    if (auto it = j.find("orientation"); it != j.end()) {
        const auto q = numbers(*it, "orientation", 4);
        Quat quat(q[0], q[1], q[2], q[3]);
        if (!(quat.norm() > 1e-12)) {
            throw DecodeError("orientation quaternion is degenerate");
        }
        m.orientation = quat.normalized();
    }
    if (auto it = j.find("jaw"); it != j.end()) {
        m.jaw = finite_number(*it, "jaw");
    }
    if (auto it = j.find("active"); it != j.end()) {
        if (!it->is_boolean()) {
            throw DecodeError("field 'active' must be a boolean");
        }
        m.active = it->get<bool>();
    }
    if (auto it = j.find("kind"); it != j.end()) {
        if (!it->is_string()) {
            throw DecodeError("field 'kind' must be a string");
        }
        try {
            m.kind = tool_kind_from_string(it->get<std::string>());
        } catch (const ValidationError& e) {
            throw DecodeError(e.what());
        }
    }

    switch (m.type) {
    case MessageType::Pose:
        if (!m.position || !m.orientation) {
            throw DecodeError("pose message requires position and orientation");
        }
        break;
    case MessageType::Event:
        if (!m.jaw && !m.active) {
            throw DecodeError("event message requires jaw or active");
        }
        break;
    case MessageType::SelectTool:
        if (!m.kind) {
            throw DecodeError("select_tool message requires kind");
        }
        break;
    case MessageType::Reset: break;
    }
    return m;
}

std::string encode_message(const SessionMessage& m)
{
    json j;
    switch (m.type) {
    case MessageType::Pose: j["type"] = "pose"; break;
    case MessageType::Event: j["type"] = "event"; break;
    case MessageType::SelectTool: j["type"] = "select_tool"; break;
    case MessageType::Reset: j["type"] = "reset"; break;
    }
    j["tool"] = m.tool;
    if (m.position) {
        j["position"] = {m.position->x(), m.position->y(), m.position->z()};
    }
    if (m.orientation) {
        j["orientation"] = {m.orientation->w(), m.orientation->x(), m.orientation->y(), m.orientation->z()};
    }
    if (m.jaw) {
        j["jaw"] = *m.jaw;
    }
    if (m.active) {
        j["active"] = *m.active;
    }
    if (m.kind) {
        j["kind"] = to_string(*m.kind);
    }
    j["t"] = m.client_time_ms;
    return j.dump();
}

std::string hello_message(const std::string& scenario, const std::vector<HelloTool>& tools, double snapshot_rate,
                          double frame_rate)
{
    json j;
    j["type"] = "hello";
    j["protocol"] = kProtocolVersion;
    j["scenario"] = scenario;
    j["snapshot_rate"] = snapshot_rate;
    j["frame_rate"] = frame_rate;
    j["tools"] = json::array();
    for (const auto& t : tools) {
        j["tools"].push_back({{"id", t.id}, {"kind", to_string(t.kind)}});
    }
    return j.dump();
}

std::string error_message(const std::string& what)
{
    return json{{"type", "error"}, {"message", what}}.dump();
}

}  // namespace fetosim
