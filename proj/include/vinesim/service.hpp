#pragma once

#include "vinesim/config.hpp"
#include "vinesim/simulation.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace vinesim::service {

// Receives serialized outbound messages. Implementations must not block.
class FrameSink {
public:
    virtual ~FrameSink() = default;
    virtual void deliver_frame(std::shared_ptr<const std::string> message) = 0;
    virtual void deliver_close(std::shared_ptr<const std::string> message) = 0;
};

// One simulation plus its subscribers. In realtime mode a dedicated thread ticks the
// simulation at dt; otherwise the owner calls advance().
class LiveSession {
public:
    LiveSession(std::string id, SessionConfig config, bool realtime);
    ~LiveSession();

    LiveSession(const LiveSession&) = delete;
    LiveSession& operator=(const LiveSession&) = delete;

    const std::string& id() const { return id_; }
    Simulation& simulation() { return sim_; }

    void subscribe(const std::shared_ptr<FrameSink>& sink);
    // Steps `ticks` times and publishes due frames. Returns the frames produced.
    std::vector<StateFrame> advance(std::int64_t ticks);
    // Stops the tick loop and sends the terminal marker to subscribers. Idempotent.
    void close();
    bool closed() const { return closed_; }

private:
    void publish(const StateFrame& frame);
    void run_loop(std::stop_token stop);

    std::string id_;
    Simulation sim_;
    std::mutex sinks_mutex_;
    std::vector<std::weak_ptr<FrameSink>> sinks_;
    std::atomic<bool> closed_{false};
    std::jthread loop_;
};

struct CoreOptions {
    bool realtime = true;
    // Command logs of closed sessions are written here as <id>.csv when set.
    std::optional<std::filesystem::path> record_dir;
};

// Transport-independent message handling: one JSON document in, one reply out.
class ServiceCore {
public:
    explicit ServiceCore(CoreOptions options = {});
    ~ServiceCore();

    // Handles create/command/close. `sink` (may be null) is subscribed to sessions it creates.
    nlohmann::json dispatch(const nlohmann::json& message, const std::shared_ptr<FrameSink>& sink = nullptr);
    nlohmann::json dispatch_text(const std::string& text, const std::shared_ptr<FrameSink>& sink = nullptr);

    std::string create_session(const nlohmann::json& config_doc, const std::shared_ptr<FrameSink>& sink = nullptr);
    // Returns the simulation time the command applies at. Throws CommandRejected or std::out_of_range.
    double send_command(const std::string& id, const CommandRecord& record);
    void close_session(const std::string& id);

    std::shared_ptr<LiveSession> find(const std::string& id) const;
    std::vector<std::string> session_ids() const;
    void close_all();

private:
    std::string next_id();

    CoreOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
    std::uint64_t counter_ = 0;
    std::uint64_t salt_;
};

nlohmann::json error_message(const std::string& code, const std::string& text, const std::string& invariant = {});

struct Endpoint {
    std::string host = "127.0.0.1";
    unsigned short port = 8765;
};

// "host:port", ":port" or "port".
Endpoint parse_endpoint(const std::string& text);

inline constexpr const char* kAddressEnv = "VINESIM_ADDR";
inline constexpr const char* kDefaultAddress = "127.0.0.1:8765";

// Command line flag over environment over config file over the built-in default.
std::string resolve_address(const std::optional<std::string>& flag, const char* env_value,
                            const std::optional<std::string>& config_value);

// WebSocket server: each text message is one JSON document.
class Server {
public:
    Server(Endpoint endpoint, CoreOptions options = {}, int threads = 2);
    ~Server();

    // Binds and starts serving on background threads. Throws IoError on bind failure.
    void start();
    void stop();
    // Blocks until stop() is called from another thread or a signal handler.
    void wait();

    unsigned short port() const;
    ServiceCore& core();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vinesim::service
