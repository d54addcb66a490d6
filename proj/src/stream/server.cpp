#include "fetosim/stream/server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <iostream>
#include <mutex>
#include <thread>

#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "fetosim/stream/session.hpp"

namespace fetosim {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

using Payload = std::shared_ptr<const std::vector<std::uint8_t>>;

Payload text_payload(const std::string& s)
{
    return std::make_shared<const std::vector<std::uint8_t>>(s.begin(), s.end());
}

}  // namespace

class Connection;

struct Server::Impl {
    Impl(const Scenario& scenario, const ServerOptions& opts)
        : session(scenario), options(opts), acceptor(ioc), signals(ioc)
    {
        const tcp::endpoint endpoint(net::ip::make_address(options.address), options.port);
        acceptor.open(endpoint.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(endpoint);
        acceptor.listen(1);
    }

    void do_accept();
    void connection_closed(const Connection* c);
    void physics_loop();
    void publish(bool force_indices);

    Session session;
    ServerOptions options;
    std::mutex session_mutex;

    net::io_context ioc{1};
    tcp::acceptor acceptor;
    net::signal_set signals;
    std::shared_ptr<Connection> connection;  // IO thread only

    std::atomic<bool> connected{false};
    std::atomic<bool> stopping{false};
    std::atomic<bool> fresh_client{false};
    std::atomic<bool> snapshot_in_flight{false};
    std::atomic<std::int64_t> frame{0};
    std::thread physics;

    // Physics thread only.
    std::uint32_t sent_topology = 0;
    std::uint64_t sent_generation = 0;
};

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket&& socket, Server::Impl& server) : ws_(std::move(socket)), server_(server) {}

    void start()
    {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
    }

    void send(bool binary, Payload data)
    {
        queue_.emplace_back(binary, std::move(data));
        if (queue_.size() == 1) {
            write();
        }
    }

    void close()
    {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void on_accept(beast::error_code ec)
    {
        if (ec) {
            server_.connection_closed(this);
            return;
        }
        std::string hello;
        {
            std::lock_guard lock(server_.session_mutex);
            hello = server_.session.hello(server_.options.snapshot_rate);
        }
        send(false, text_payload(hello));
        server_.fresh_client = true;
        server_.connected = true;
        read();
    }

    void read()
    {
        ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t)
    {
        if (ec) {
            server_.connection_closed(this);
            return;
        }
        if (!ws_.got_text()) {
            send(false, text_payload(error_message("control messages must be text frames")));
        } else {
            const std::string text = beast::buffers_to_string(buffer_.data());
            try {
                server_.session.mailbox().post(decode_message(text));
            } catch (const DecodeError& e) {
                send(false, text_payload(error_message(e.what())));
            }
        }
        buffer_.consume(buffer_.size());
        read();
    }

    void write()
    {
        ws_.binary(queue_.front().first);
        ws_.async_write(net::buffer(*queue_.front().second),
                        beast::bind_front_handler(&Connection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t)
    {
        const bool was_snapshot = queue_.front().first;
        queue_.pop_front();
        if (was_snapshot) {
            server_.snapshot_in_flight = false;
        }
        if (ec) {
            server_.connection_closed(this);
            return;
        }
        if (!queue_.empty()) {
            write();
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::pair<bool, Payload>> queue_;
    Server::Impl& server_;
};

void Server::Impl::do_accept()
{
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (!stopping) {
                do_accept();
            }
            return;
        }
        if (connection) {
            // One interactive client at a time.
            beast::error_code ignored;
            socket.shutdown(tcp::socket::shutdown_both, ignored);
            socket.close(ignored);
        } else {
            connection = std::make_shared<Connection>(std::move(socket), *this);
            connection->start();
        }
        do_accept();
    });
}

void Server::Impl::connection_closed(const Connection* c)
{
    if (connection.get() == c) {
        connection->close();
        connection.reset();
        connected = false;
        snapshot_in_flight = false;
    }
}

void Server::Impl::publish(bool force_indices)
{
    std::vector<std::uint8_t> bytes;
    {
        std::lock_guard lock(session_mutex);
        const std::uint32_t topology = session.simulation().topology_version();
        const std::uint64_t generation = session.generation();
        const bool indices = force_indices || topology != sent_topology || generation != sent_generation;
        bytes = encode_snapshot(session.snapshot(indices));
        sent_topology = topology;
        sent_generation = generation;
    }
    snapshot_in_flight = true;
    auto payload = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
    net::post(ioc, [this, payload] {
        if (connection) {
            connection->send(true, payload);
        } else {
            snapshot_in_flight = false;
        }
    });
}

void Server::Impl::physics_loop()
{
    using clock = std::chrono::steady_clock;
    const auto frame_period = std::chrono::duration<double>(session.scenario().config.solver.frame_dt);
    const auto publish_period = std::chrono::duration<double>(1.0 / options.snapshot_rate);
    auto next_frame = clock::now();
    auto last_publish = clock::now() - std::chrono::hours(1);

    while (!stopping) {
        if (!connected) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            next_frame = clock::now();
            continue;
        }
        const bool fresh = fresh_client.exchange(false);
        if (fresh) {
            last_publish = clock::now() - std::chrono::hours(1);
        }

        std::vector<std::string> errors;
        {
            std::lock_guard lock(session_mutex);
            try {
                session.step(&errors);
            } catch (const SolverAbort& e) {
                errors.push_back(std::string("simulation aborted, resetting: ") + e.what());
                SessionMessage reset;
                reset.type = MessageType::Reset;
                session.mailbox().post(reset);
            }
            frame = session.simulation().frame();
        }
        for (const auto& e : errors) {
            auto payload = text_payload(error_message(e));
            net::post(ioc, [this, payload] {
                if (connection) {
                    connection->send(false, payload);
                }
            });
        }

        const auto now = clock::now();
        if ((fresh || now - last_publish >= publish_period) && !snapshot_in_flight) {
            publish(fresh);
            last_publish = now;
        }

        if (options.realtime) {
            next_frame += std::chrono::duration_cast<clock::duration>(frame_period);
            if (clock::now() - next_frame > std::chrono::milliseconds(250)) {
                next_frame = clock::now();
            }
            std::this_thread::sleep_until(next_frame);
        }
    }
}

Server::Server(const Scenario& scenario, const ServerOptions& options)
    : impl_(std::make_unique<Impl>(scenario, options))
{
    if (!(options.snapshot_rate > 0.0)) {
        throw ValidationError("snapshot rate must be positive");
    }
}

Server::~Server()
{
    stop();
    if (impl_->physics.joinable()) {
        impl_->physics.join();
    }
}

unsigned short Server::port() const
{
    return impl_->acceptor.local_endpoint().port();
}

std::int64_t Server::frame() const
{
    return impl_->frame;
}

void Server::run()
{
    Impl& s = *impl_;
    if (s.options.handle_signals) {
        s.signals.add(SIGINT);
        s.signals.add(SIGTERM);
        s.signals.async_wait([this](beast::error_code, int) { stop(); });
    }
    s.do_accept();
    s.physics = std::thread([&s] { s.physics_loop(); });
    s.ioc.run();
    s.stopping = true;
    s.physics.join();
}

void Server::stop()
{
    Impl& s = *impl_;
    if (s.stopping.exchange(true)) {
        return;
    }
    net::post(s.ioc, [&s] {
        beast::error_code ec;
        s.acceptor.close(ec);
        s.signals.cancel(ec);
        if (s.connection) {
            s.connection->close();
            s.connection.reset();
        }
        s.ioc.stop();
    });
}

void serve_session(const Scenario& scenario, const ServerOptions& options)
{
    ServerOptions opts = options;
    opts.handle_signals = true;
    Server server(scenario, opts);
    std::cout << "serving " << scenario.name << " on ws://" << opts.address << ':' << server.port()
              << " (protocol " << kProtocolVersion << ")" << std::endl;
    server.run();
}

}  // namespace fetosim
