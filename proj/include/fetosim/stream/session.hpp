#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fetosim/harness/scenario.hpp"
#include "fetosim/stream/protocol.hpp"

namespace fetosim {

/// Inbox shared by the IO side and the simulation owner. Poses are
/// latest-wins per tool; events, tool selection and resets queue in
/// arrival order. A reset discards poses that arrived before it.
class Mailbox {
public:
    struct Batch {
        std::vector<SessionMessage> controls;
        std::map<int, SessionMessage> poses;

        bool empty() const { return controls.empty() && poses.empty(); }
    };

    void post(const SessionMessage& message);
    Batch take();

private:
    std::mutex mutex_;
    Batch pending_;
};

/// Simulation plus the message application and snapshot logic of an
/// interactive session, independent of the transport.
class Session {
public:
    explicit Session(const Scenario& scenario);

    Mailbox& mailbox() { return mailbox_; }
    const Simulation& simulation() const { return sim_; }
    const Scenario& scenario() const { return scenario_; }

    /// Applies everything in the mailbox at a frame boundary. Returns an
    /// error text per rejected message.
    std::vector<std::string> apply_pending();
    /// apply_pending followed by one simulation frame.
    FrameTelemetry step(std::vector<std::string>* errors = nullptr);

    /// Read-only copy of the current surface. Indices are included when
    /// requested; callers send them when the topology version changed.
    Snapshot snapshot(bool include_indices) const;
    std::string hello(double snapshot_rate) const;
    /// Incremented by every applied reset.
    std::uint64_t generation() const { return generation_; }

private:
    void apply(const SessionMessage& message);

    Scenario scenario_;
    Simulation sim_;
    Mailbox mailbox_;
    FrameTelemetry last_;
    std::uint64_t generation_ = 0;
};

}  // namespace fetosim
