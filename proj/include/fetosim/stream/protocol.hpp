#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fetosim/tools.hpp"

namespace fetosim {

inline constexpr const char* kProtocolVersion = "1";

/// Binary snapshot layout, little-endian:
///
///   offset  size  field
///        0     4  magic "FSNP"
///        4     4  u32 layout version (1)
///        8     8  u64 frame index
///       16     8  f64 simulation time, s
///       24     4  u32 topology version
///       28     4  u32 flags (bit 0: triangle indices present)
///       32     4  u32 V, surface vertex count
///       36     4  u32 T, surface triangle count
///       40     4  u32 K, tool count
///       44     4  f32 volume ratio
///       48     4  u32 contact count
///       52        f32[3V] positions, m
///                 u32[3T] indices into the snapshot's vertices (flag bit 0)
///                 u8[T] coagulation flags, zero-padded to a multiple of 4
///                 K tool records of 44 bytes:
///                   u32 id, u32 bits (0-1 kind, 2 active), f32 force magnitude N,
///                   f32[3] position, f32[4] orientation (w, x, y, z), f32 jaw
inline constexpr std::uint32_t kSnapshotLayout = 1;
inline constexpr std::size_t kSnapshotHeaderBytes = 52;
inline constexpr std::size_t kToolRecordBytes = 44;
inline constexpr std::uint32_t kSnapshotHasIndices = 1u;

struct ToolRecord {
    std::uint32_t id = 0;
    ToolKind kind = ToolKind::Diathermy;
    bool active = false;
    float force = 0.0f;
    std::array<float, 3> position{};
    std::array<float, 4> orientation{1.0f, 0.0f, 0.0f, 0.0f};
    float jaw = 0.0f;

    bool operator==(const ToolRecord&) const = default;
};

struct Snapshot {
    std::uint64_t frame = 0;
    double time = 0.0;
    std::uint32_t topology_version = 0;
    std::uint32_t triangle_count = 0;
    float volume_ratio = 1.0f;
    std::uint32_t contact_count = 0;
    std::vector<float> positions;                        // 3 per vertex
    std::optional<std::vector<std::uint32_t>> indices;  // 3 per triangle
    std::vector<std::uint8_t> coagulated;                // 1 per triangle
    std::vector<ToolRecord> tools;

    std::size_t vertex_count() const { return positions.size() / 3; }
    bool operator==(const Snapshot&) const = default;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

std::vector<std::uint8_t> encode_snapshot(const Snapshot& snapshot);
/// Throws DecodeError on a bad tag, inconsistent counts or truncation.
Snapshot decode_snapshot(std::span<const std::uint8_t> bytes);

enum class MessageType { Pose, Event, SelectTool, Reset };

/// Inbound control message (UTF-8 JSON text frame):
///   {"type":"pose","tool":0,"position":[x,y,z],"orientation":[w,x,y,z],"jaw":1,"active":false,"t":0}
///   {"type":"event","tool":0,"active":true}          (jaw and/or active)
///   {"type":"select_tool","tool":0,"kind":"grasper"}
///   {"type":"reset"}
struct SessionMessage {
    MessageType type = MessageType::Pose;
    int tool = 0;
    std::optional<Vec3> position;
    std::optional<Quat> orientation;  // normalized on decode
    std::optional<double> jaw;
    std::optional<bool> active;
    std::optional<ToolKind> kind;
    double client_time_ms = 0.0;
};

/// Throws DecodeError for malformed JSON, unknown type tags, missing or
/// non-finite pose fields and degenerate quaternions.
SessionMessage decode_message(std::string_view text);
std::string encode_message(const SessionMessage& message);

struct HelloTool {
    int id = 0;
    ToolKind kind = ToolKind::Diathermy;
};

std::string hello_message(const std::string& scenario, const std::vector<HelloTool>& tools, double snapshot_rate,
                          double frame_rate);
std::string error_message(const std::string& what);

}  // namespace fetosim
