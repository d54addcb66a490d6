#pragma once

#include <memory>
#include <string>

#include "fetosim/harness/scenario.hpp"

namespace fetosim {

struct ServerOptions {
    std::string address = "0.0.0.0";
    unsigned short port = 8765;  // 0 picks a free port
    double snapshot_rate = 30.0;  // Hz
    bool realtime = true;         // pace frames at the scenario frame rate
    bool handle_signals = false;  // stop on SIGINT / SIGTERM
};

/// Single-client WebSocket session. The simulation runs on its own
/// thread while a client is connected and pauses otherwise; the IO
/// thread decodes control messages into the session mailbox and writes
/// the hello frame, error frames and binary snapshots.
class Server {
public:
    Server(const Scenario& scenario, const ServerOptions& options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Port the listener is bound to.
    unsigned short port() const;
    /// Blocks until stop() is called.
    void run();
    /// Thread-safe.
    void stop();
    /// Frames simulated so far since start or the last reset.
    std::int64_t frame() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

/// Runs a server until interrupted.
void serve_session(const Scenario& scenario, const ServerOptions& options);

}  // namespace fetosim
