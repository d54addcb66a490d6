#include <chrono>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fetosim/stream/protocol.hpp"
#include "fetosim/stream/server.hpp"
#include "fetosim/stream/session.hpp"

using namespace fetosim;

namespace {

Snapshot sample_snapshot(bool with_indices)
{
    Snapshot s;
    s.frame = 123456789012ull;
    s.time = 17.25;
    s.topology_version = 3;
    s.volume_ratio = 0.995f;
    s.contact_count = 42;
    s.positions = {0.f, 0.f, 0.f, 1.f, 0.f, 0.f, 0.f, 1.f, 0.f, 0.f, 0.f, 1.f};
    s.triangle_count = 3;
    if (with_indices) {
        s.indices = std::vector<std::uint32_t>{0, 1, 2, 0, 3, 1, 1, 3, 2};
    }
    s.coagulated = {1, 0, 1};
    ToolRecord t;
    t.id = 2;
    t.kind = ToolKind::Grasper;
    t.active = true;
    t.force = 0.25f;
    t.position = {0.01f, -0.02f, 0.03f};
    t.orientation = {0.f, 1.f, 0.f, 0.f};
    t.jaw = 0.5f;
    s.tools = {t};
    return s;
}

Scenario grasp_scenario()
{
    return load_scenario(FETOSIM_SCENARIO_DIR "/grasp.yaml");
}

SessionMessage pose_message(int tool, const Vec3& p, double jaw)
{
    SessionMessage m;
    m.type = MessageType::Pose;
    m.tool = tool;
    m.position = p;
    m.orientation = Quat::Identity();
    m.jaw = jaw;
    return m;
}

}  // namespace

TEST(Snapshot, RoundTripWithAndWithoutIndices)
{
    for (bool with : {true, false}) {
        const Snapshot s = sample_snapshot(with);
        const auto bytes = encode_snapshot(s);
        const std::size_t expected = kSnapshotHeaderBytes + 4 * 12 + (with ? 4 * 9 : 0) + 4 + kToolRecordBytes;
        EXPECT_EQ(bytes.size(), expected);
        EXPECT_EQ(bytes[0], 'F');
        EXPECT_EQ(bytes[3], 'P');
        EXPECT_EQ(decode_snapshot(bytes), s);
    }
}

TEST(Snapshot, TruncatedOrCorruptRejected)
{
    const auto bytes = encode_snapshot(sample_snapshot(true));
    for (std::size_t cut : {std::size_t{0}, std::size_t{10}, kSnapshotHeaderBytes, bytes.size() - 1}) {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        EXPECT_THROW(decode_snapshot(part), DecodeError) << cut;
    }
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_snapshot(bad_magic), DecodeError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_snapshot(trailing), DecodeError);
}

TEST(Messages, DecodeValidAndRoundTrip)
{
    const SessionMessage m = decode_message(
        R"({"type":"pose","tool":1,"position":[0.1,0.2,0.3],"orientation":[2,0,0,0],"jaw":0.5,"active":true,"t":12.5})");
    EXPECT_EQ(m.type, MessageType::Pose);
    EXPECT_EQ(m.tool, 1);
    EXPECT_TRUE(m.position->isApprox(Vec3(0.1, 0.2, 0.3)));
    EXPECT_NEAR(m.orientation->w(), 1.0, 1e-15);
    EXPECT_EQ(*m.jaw, 0.5);
    EXPECT_TRUE(*m.active);
    EXPECT_EQ(m.client_time_ms, 12.5);

    const SessionMessage back = decode_message(encode_message(m));
    EXPECT_EQ(back.tool, m.tool);
    EXPECT_EQ(*back.position, *m.position);

    const SessionMessage sel = decode_message(R"({"type":"select_tool","tool":4,"kind":"scissors"})");
    EXPECT_EQ(sel.type, MessageType::SelectTool);
    EXPECT_EQ(*sel.kind, ToolKind::Scissors);
    EXPECT_EQ(decode_message(R"({"type":"reset"})").type, MessageType::Reset);
    EXPECT_EQ(*decode_message(R"({"type":"event","tool":0,"active":false})").active, false);
}

TEST(Messages, MalformedRejected)
{
    for (const char* text : {
             "{not json",
             R"({"type":"teleport"})",
             R"({"tool":1})",
             R"({"type":"pose","tool":1,"position":[0,0],"orientation":[1,0,0,0]})",
             R"({"type":"pose","tool":1,"position":[0,0,0],"orientation":[0,0,0,0]})",
             R"({"type":"pose","tool":1,"position":[0,0,"a"],"orientation":[1,0,0,0]})",
             R"({"type":"select_tool","tool":1,"kind":"laser"})",
         }) {
        EXPECT_THROW(decode_message(text), DecodeError) << text;
    }
}

TEST(Messages, HelloAndErrorAreJson)
{
    const auto hello = nlohmann::json::parse(hello_message("grasp", {{1, ToolKind::Grasper}}, 30.0, 60.0));
    EXPECT_EQ(hello["type"], "hello");
    EXPECT_EQ(hello["scenario"], "grasp");
    EXPECT_EQ(hello["tools"].size(), 1u);
    const auto err = nlohmann::json::parse(error_message("bad \"thing\""));
    EXPECT_EQ(err["type"], "error");
    EXPECT_EQ(err["message"], "bad \"thing\"");
}

TEST(Mailbox, LatestPoseWinsAndResetDropsEarlierPoses)
{
    Mailbox box;
    box.post(pose_message(1, Vec3(1, 0, 0), 1.0));
    box.post(pose_message(1, Vec3(2, 0, 0), 1.0));
    box.post(pose_message(2, Vec3(3, 0, 0), 1.0));
    auto batch = box.take();
    ASSERT_EQ(batch.poses.size(), 2u);
    EXPECT_EQ(batch.poses.at(1).position->x(), 2.0);
    EXPECT_TRUE(box.take().empty());

    box.post(pose_message(1, Vec3(4, 0, 0), 1.0));
    SessionMessage reset;
    reset.type = MessageType::Reset;
    box.post(reset);
    box.post(pose_message(2, Vec3(5, 0, 0), 1.0));
    batch = box.take();
    ASSERT_EQ(batch.controls.size(), 1u);
    EXPECT_EQ(batch.controls[0].type, MessageType::Reset);
    ASSERT_EQ(batch.poses.size(), 1u);
    EXPECT_TRUE(batch.poses.contains(2));
}

TEST(Session, ResetRestoresInitialState)
{
    Session session(grasp_scenario());
    const Snapshot initial = session.snapshot(true);
    session.mailbox().post(pose_message(1, Vec3(0, 0, 0.0095), 0.0));
    for (int i = 0; i < 10; ++i) {
        session.step();
    }
    EXPECT_EQ(session.simulation().frame(), 10);
    SessionMessage reset;
    reset.type = MessageType::Reset;
    session.mailbox().post(reset);
    EXPECT_TRUE(session.apply_pending().empty());
    EXPECT_EQ(session.simulation().frame(), 0);
    EXPECT_EQ(session.generation(), 1u);
    EXPECT_EQ(session.snapshot(true), initial);
}

TEST(Session, BadMessagesReportErrors)
{
    Session session(grasp_scenario());
    session.mailbox().post(pose_message(99, Vec3::Zero(), 1.0));
    const auto errors = session.apply_pending();
    EXPECT_EQ(errors.size(), 1u);
}

TEST(Session, StreamingDoesNotChangeTrajectory)
{
    const Scenario s = grasp_scenario();
    Simulation direct = make_simulation(s);
    Session session(s);
    for (int i = 0; i < 30; ++i) {
        const auto a = direct.step_frame();
        const auto b = session.step();
        (void)encode_snapshot(session.snapshot(i % 2 == 0));
        ASSERT_EQ(a.position_hash, b.position_hash) << "frame " << i;
    }
}

TEST(Session, SnapshotMatchesSurface)
{
    Session session(grasp_scenario());
    const Snapshot s = session.snapshot(true);
    const auto& mesh = session.simulation().mesh();
    EXPECT_EQ(s.triangle_count, mesh.surface.size());
    EXPECT_EQ(s.vertex_count(), surface_vertices(mesh).size());
    ASSERT_TRUE(s.indices.has_value());
    for (std::uint32_t i : *s.indices) {
        EXPECT_LT(i, s.vertex_count());
    }
    EXPECT_FALSE(session.snapshot(false).indices.has_value());
    EXPECT_EQ(s.tools.size(), 2u);
}

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

class Client {
public:
    explicit Client(unsigned short port) : ws_(ioc_)
    {
        tcp::resolver resolver(ioc_);
        boost::asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/");
    }

    void send(const std::string& text)
    {
        ws_.text(true);
        ws_.write(boost::asio::buffer(text));
    }

    // Next binary snapshot, skipping text frames (collected in `texts`).
    Snapshot next_snapshot()
    {
        for (;;) {
            beast::flat_buffer buffer;
            ws_.read(buffer);
            const auto data = buffer.cdata();
            const auto* p = static_cast<const std::uint8_t*>(data.data());
            if (ws_.got_binary()) {
                return decode_snapshot(std::span<const std::uint8_t>(p, data.size()));
            }
            texts.emplace_back(reinterpret_cast<const char*>(p), data.size());
        }
    }

    std::string next_text()
    {
        beast::flat_buffer buffer;
        ws_.read(buffer);
        return beast::buffers_to_string(buffer.cdata());
    }

    void close() { ws_.close(websocket::close_code::normal); }

    std::vector<std::string> texts;

private:
    boost::asio::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

std::string pose_json(const Vec3& p, double jaw)
{
    nlohmann::json j{{"type", "pose"},
                     {"tool", 1},
                     {"position", {p.x(), p.y(), p.z()}},
                     {"orientation", {1, 0, 0, 0}},
                     {"jaw", jaw},
                     {"active", false}};
    return j.dump();
}

Snapshot wait_frames(Client& c, std::uint64_t frames)
{
    Snapshot s = c.next_snapshot();
    const std::uint64_t start = s.frame;
    while (s.frame < start + frames) {
        s = c.next_snapshot();
    }
    return s;
}

}  // namespace

TEST(Server, EndToEndGraspAndReset)
{
    ServerOptions opts;
    opts.address = "127.0.0.1";
    opts.port = 0;
    opts.snapshot_rate = 30.0;
    opts.realtime = true;
    Server server(grasp_scenario(), opts);
    std::thread io([&] { server.run(); });

    {
        Client client(server.port());
        const auto hello = nlohmann::json::parse(client.next_text());
        EXPECT_EQ(hello["type"], "hello");
        EXPECT_EQ(hello["tools"].size(), 2u);

        Snapshot first = client.next_snapshot();
        ASSERT_TRUE(first.indices.has_value());
        EXPECT_GT(first.vertex_count(), 0u);

        client.send(pose_json(Vec3(0, 0, 0.0095), 1.0));
        wait_frames(client, 20);
        client.send(pose_json(Vec3(0, 0, 0.0095), 0.0));
        wait_frames(client, 10);
        client.send(pose_json(Vec3(0, 0, 0.014), 0.0));
        const Snapshot pulled = wait_frames(client, 20);
        ASSERT_FALSE(pulled.tools.empty());
        EXPECT_EQ(pulled.tools[0].id, 1u);
        EXPECT_GT(pulled.tools[0].force, 0.0f);

        client.send("{broken");
        client.send(R"({"type":"reset"})");
        Snapshot after = client.next_snapshot();
        while (after.frame > pulled.frame) {
            after = client.next_snapshot();
        }
        EXPECT_LT(after.frame, pulled.frame);
        EXPECT_TRUE(after.indices.has_value());
        bool saw_error = false;
        for (const auto& t : client.texts) {
            saw_error |= nlohmann::json::parse(t)["type"] == "error";
        }
        EXPECT_TRUE(saw_error);
        client.close();
    }

    server.stop();
    io.join();
}
