#include "vinesim/service.hpp"

#include "vinesim/errors.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <deque>
#include <fstream>
#include <random>

namespace vinesim::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

LiveSession::LiveSession(std::string id, SessionConfig config, bool realtime)
    : id_(std::move(id)), sim_(std::move(config.vine), config.sim)
{
    if (realtime) loop_ = std::jthread([this](std::stop_token st) { run_loop(st); });
}

LiveSession::~LiveSession() { close(); }

void LiveSession::subscribe(const std::shared_ptr<FrameSink>& sink)
{
    if (!sink) return;
    std::lock_guard lock(sinks_mutex_);
    sinks_.push_back(sink);
}

std::vector<StateFrame> LiveSession::advance(std::int64_t ticks)
{
    std::vector<StateFrame> frames;
    for (std::int64_t i = 0; i < ticks && !closed_; ++i) {
        if (auto f = sim_.tick()) {
            publish(*f);
            frames.push_back(std::move(*f));
        }
    }
    return frames;
}

void LiveSession::run_loop(std::stop_token stop)
{
    using clock = std::chrono::steady_clock;
    const auto dt = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(sim_.settings().dt));
    auto next = clock::now();
    while (!stop.stop_requested()) {
        next += dt;
        std::this_thread::sleep_until(next);
        if (stop.stop_requested()) break;
        if (auto f = sim_.tick()) publish(*f);
    }
}

void LiveSession::publish(const StateFrame& frame)
{
    auto msg = std::make_shared<const std::string>(frame_to_json(frame, id_).dump());
    std::lock_guard lock(sinks_mutex_);
    std::erase_if(sinks_, [&](const std::weak_ptr<FrameSink>& w) {
        auto s = w.lock();
        if (!s) return true;
        s->deliver_frame(msg);
        return false;
    });
}

void LiveSession::close()
{
    if (closed_.exchange(true)) return;
    if (loop_.joinable()) {
        loop_.request_stop();
        if (loop_.get_id() != std::this_thread::get_id()) loop_.join();
    }
    auto msg = std::make_shared<const std::string>(json{{"type", "close"}, {"session", id_}}.dump());
    std::lock_guard lock(sinks_mutex_);
    for (auto& w : sinks_) {
        if (auto s = w.lock()) s->deliver_close(msg);
    }
    sinks_.clear();
}

json error_message(const std::string& code, const std::string& text, const std::string& invariant)
{
    json e{{"type", "error"}, {"code", code}, {"message", text}};
    if (!invariant.empty()) e["invariant"] = invariant;
    return e;
}

ServiceCore::ServiceCore(CoreOptions options) : options_(std::move(options)), salt_(std::random_device{}()) {}

ServiceCore::~ServiceCore() { close_all(); }

std::string ServiceCore::next_id()
{
    // Counter keeps ids unique for the server lifetime; the salt keeps them unguessable-ish.
    ++counter_;
    return fmt::format("{:08x}-{:04x}", static_cast<std::uint32_t>(salt_ ^ (counter_ * 0x9e3779b97f4a7c15ULL)),
                       counter_);
}

std::string ServiceCore::create_session(const json& config_doc, const std::shared_ptr<FrameSink>& sink)
{
    SessionConfig cfg = parse_session_config(config_doc);
    std::string id;
    {
        std::lock_guard lock(mutex_);
        id = next_id();
    }
    auto session = std::make_shared<LiveSession>(id, std::move(cfg), options_.realtime);
    session->subscribe(sink);
    std::lock_guard lock(mutex_);
    sessions_.emplace(id, session);
    return id;
}

std::shared_ptr<LiveSession> ServiceCore::find(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

double ServiceCore::send_command(const std::string& id, const CommandRecord& record)
{
    auto session = find(id);
    if (!session) throw std::out_of_range(fmt::format("unknown session '{}'", id));
    return session->simulation().enqueue(record);
}

void ServiceCore::close_session(const std::string& id)
{
    std::shared_ptr<LiveSession> session;
    {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw std::out_of_range(fmt::format("unknown session '{}'", id));
        session = it->second;
        sessions_.erase(it);
    }
    session->close();
    if (options_.record_dir) {
        std::ofstream out(*options_.record_dir / (id + ".csv"));
        const auto log = session->simulation().command_log();
        write_command_log(out, log);
    }
}

std::vector<std::string> ServiceCore::session_ids() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
}

void ServiceCore::close_all()
{
    for (const auto& id : session_ids()) {
        try {
            close_session(id);
        } catch (const std::out_of_range&) {
        }
    }
}

json ServiceCore::dispatch(const json& message, const std::shared_ptr<FrameSink>& sink)
{
    if (!message.is_object() || !message.contains("type") || !message.at("type").is_string()) {
        return error_message("bad_request", "message must be an object with a string 'type'");
    }
    const auto type = message.at("type").get<std::string>();
    const std::string session = message.contains("session") && message.at("session").is_string()
                                    ? message.at("session").get<std::string>()
                                    : std::string{};
    try {
        if (type == "create") {
            const auto id = create_session(message.value("config", json::object()), sink);
            return {{"type", "ack"}, {"request", "create"}, {"session", id}, {"t_s", 0.0}};
        }
        if (type == "command" || type == "close") {
            if (session.empty()) return error_message("bad_request", "missing 'session'");
            if (type == "close") {
                close_session(session);
                return {{"type", "ack"}, {"request", "close"}, {"session", session}};
            }
            const double t = send_command(session, command_record_from_json(message));
            return {{"type", "ack"}, {"request", "command"}, {"session", session}, {"apply_t_s", t}};
        }
        return error_message("bad_request", fmt::format("unsupported message type '{}'", type));
    } catch (const ValidationError& e) {
        auto err = error_message(type == "create" ? "invalid_config" : "rejected", e.what(), e.invariant());
        if (!session.empty()) err["session"] = session;
        return err;
    } catch (const CommandRejected& e) {
        auto err = error_message("rejected", e.what(), "command.range");
        err["session"] = session;
        return err;
    } catch (const std::out_of_range& e) {
        auto err = error_message("not_found", e.what());
        err["session"] = session;
        return err;
    } catch (const IoError& e) {
        return error_message("io_error", e.what());
    } catch (const json::exception& e) {
        return error_message("bad_request", e.what());
    }
}

json ServiceCore::dispatch_text(const std::string& text, const std::shared_ptr<FrameSink>& sink)
{
    json msg = json::parse(text, nullptr, false);
    if (msg.is_discarded()) return error_message("bad_request", "message is not valid JSON");
    return dispatch(msg, sink);
}

Endpoint parse_endpoint(const std::string& text)
{
    Endpoint ep;
    const auto colon = text.rfind(':');
    std::string port = text;
    if (colon != std::string::npos) {
        if (colon > 0) ep.host = text.substr(0, colon);
        port = text.substr(colon + 1);
    }
    try {
        std::size_t used = 0;
        const int p = std::stoi(port, &used);
        if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument("range");
        ep.port = static_cast<unsigned short>(p);
    } catch (const std::exception&) {
        throw ValidationError("service.addr", fmt::format("invalid listen address '{}'", text));
    }
    return ep;
}

std::string resolve_address(const std::optional<std::string>& flag, const char* env_value,
                            const std::optional<std::string>& config_value)
{
    if (flag && !flag->empty()) return *flag;
    if (env_value && *env_value) return env_value;
    if (config_value && !config_value->empty()) return *config_value;
    return kDefaultAddress;
}

namespace {

// Replies are queued and never dropped; frames conflate to the latest one.
class Connection : public FrameSink, public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, ServiceCore& core) : ws_(std::move(socket)), core_(core) {}

    void run()
    {
        asio::dispatch(ws_.get_executor(), [self = shared_from_this()] {
            self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
            self->ws_.async_accept([self](beast::error_code ec) {
                if (ec) return;
                self->do_read();
            });
        });
    }

    void deliver_frame(std::shared_ptr<const std::string> message) override
    {
        asio::post(ws_.get_executor(), [self = shared_from_this(), message] {
            self->latest_frame_ = message;
            self->maybe_write();
        });
    }

    void deliver_close(std::shared_ptr<const std::string> message) override
    {
        asio::post(ws_.get_executor(), [self = shared_from_this(), message] {
            self->latest_frame_.reset();
            self->control_.push_back(message);
            self->maybe_write();
        });
    }

private:
    void do_read()
    {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->on_disconnect();
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            json reply = self->core_.dispatch_text(text, self);
            if (reply.value("type", "") == "ack" && reply.value("request", "") == "create") {
                self->owned_.push_back(reply.at("session").get<std::string>());
            }
            self->control_.push_back(std::make_shared<const std::string>(reply.dump()));
            self->maybe_write();
            self->do_read();
        });
    }

    void maybe_write()
    {
        if (writing_ || dead_) return;
        if (!control_.empty()) {
            current_ = control_.front();
            control_.pop_front();
        } else if (latest_frame_) {
            current_ = std::move(latest_frame_);
            latest_frame_.reset();
        } else {
            return;
        }
        writing_ = true;
        ws_.text(true);
        ws_.async_write(asio::buffer(*current_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            self->current_.reset();
            if (ec) {
                self->on_disconnect();
                return;
            }
            self->maybe_write();
        });
    }

    void on_disconnect()
    {
        if (dead_) return;
        dead_ = true;
        for (const auto& id : owned_) {
            try {
                core_.close_session(id);
            } catch (const std::out_of_range&) {
            }
        }
        owned_.clear();
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    ServiceCore& core_;
    std::deque<std::shared_ptr<const std::string>> control_;
    std::shared_ptr<const std::string> latest_frame_;
    std::shared_ptr<const std::string> current_;
    std::vector<std::string> owned_;
    bool writing_ = false;
    bool dead_ = false;
};

}  // namespace

struct Server::Impl {
    Impl(Endpoint ep, CoreOptions options, int n) : endpoint(std::move(ep)), core(std::move(options)), threads(n) {}

    void accept()
    {
        acceptor->async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Connection>(std::move(socket), core)->run();
            accept();
        });
    }

    Endpoint endpoint;
    asio::io_context ioc;
    std::optional<tcp::acceptor> acceptor;
    ServiceCore core;
    int threads;
    std::vector<std::thread> workers;
    std::mutex stop_mutex;
    bool stopped = false;
};

Server::Server(Endpoint endpoint, CoreOptions options, int threads)
    : impl_(std::make_unique<Impl>(std::move(endpoint), std::move(options), std::max(threads, 1)))
{
}

Server::~Server() { stop(); }

void Server::start()
{
    auto& im = *impl_;
    beast::error_code ec;
    const auto address = asio::ip::make_address(im.endpoint.host, ec);
    if (ec) throw IoError(fmt::format("invalid listen host '{}': {}", im.endpoint.host, ec.message()));
    const tcp::endpoint ep{address, im.endpoint.port};
    im.acceptor.emplace(im.ioc);
    im.acceptor->open(ep.protocol(), ec);
    if (!ec) im.acceptor->set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) im.acceptor->bind(ep, ec);
    if (!ec) im.acceptor->listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
        throw IoError(fmt::format("cannot listen on {}:{}: {}", im.endpoint.host, im.endpoint.port, ec.message()));
    }
    spdlog::info("vinesim service listening on {}:{}", im.endpoint.host, port());
    im.accept();
    for (int i = 0; i < im.threads; ++i) im.workers.emplace_back([&im] { im.ioc.run(); });
}

void Server::stop()
{
    auto& im = *impl_;
    {
        std::lock_guard lock(im.stop_mutex);
        if (im.stopped) return;
        im.stopped = true;
    }
    im.core.close_all();
    asio::post(im.ioc, [&im] {
        beast::error_code ec;
        if (im.acceptor) im.acceptor->close(ec);
    });
    im.ioc.stop();
    for (auto& t : im.workers) {
        if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
    }
}

void Server::wait()
{
    for (auto& t : impl_->workers) {
        if (t.joinable()) t.join();
    }
}

unsigned short Server::port() const
{
    return impl_->acceptor ? impl_->acceptor->local_endpoint().port() : impl_->endpoint.port;
}

ServiceCore& Server::core() { return impl_->core; }

}  // namespace vinesim::service
