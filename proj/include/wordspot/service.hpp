#pragma once

#include "wordspot/corpus.hpp"
#include "wordspot/feedback.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace wordspot {

/// Environment variable read by `serve` for the listen address (host:port).
inline constexpr const char* kBindEnvVar = "WORDSPOT_BIND";
inline constexpr const char* kDefaultBind = "127.0.0.1:8080";

struct ServiceOptions
{
    std::chrono::seconds session_timeout{30 * 60};
    std::size_t default_top = 10;
    /// Runs while an admin mutation holds the writer gate (test hook).
    std::function<void()> admin_started;
};

/// Transport-neutral request. `image` carries an uploaded raster, taken from
/// a multipart "image" field or from a raw image body.
struct ApiRequest
{
    std::string method;
    std::string path;
    std::string body;
    std::optional<std::string> image;
    std::map<std::string, std::string> params;
};

struct ApiResponse
{
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// The /v1 HTTP API over one loaded index.
///
/// Sessions live in memory and expire after `session_timeout` without use.
/// Loading an index or fitting PCA goes through a single writer gate
/// (concurrent attempts get 409) and drops every session when the new index
/// is swapped in.
class Service
{
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    explicit Service(ServiceOptions options = {}, Clock clock = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Installs an index directly. `pages_dir` holds the page rasters used
    /// for thumbnails (doc_id = position in sorted file order).
    void set_index(CorpusIndex index, std::string index_path = {},
                   std::optional<std::filesystem::path> pages_dir = std::nullopt);

    ApiResponse handle(const ApiRequest& request);

    /// Blocks serving HTTP on host:port until stop() is called.
    /// Returns false if the address could not be bound.
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port and serves on a background thread.
    /// Returns the port, or -1 on failure.
    int listen_in_background(const std::string& host = "127.0.0.1");
    void stop();

    std::size_t session_count();

private:
    struct State;
    struct Slot;
    struct Http;

    ApiResponse search(const ApiRequest& request);
    ApiResponse feedback(const std::string& id, const ApiRequest& request);
    ApiResponse get_session(const std::string& id);
    ApiResponse admin_index(const ApiRequest& request);
    ApiResponse admin_pca(const ApiRequest& request);
    ApiResponse stats();
    ApiResponse thumbnail(const std::string& hash);

    std::shared_ptr<const State> snapshot();
    std::shared_ptr<Slot> find_session(const std::string& id);
    void install(std::shared_ptr<const State> state);
    void purge_expired();
    void mount();
    std::string new_session_id();
    std::string session_json(const Slot& slot);
    std::string thumbnail_ref(const State& state, const WordEntry& entry);

    ServiceOptions options_;
    Clock clock_;

    std::mutex state_mutex_;
    std::shared_ptr<const State> state_;
    std::uint64_t generation_ = 0;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;

    std::mutex admin_gate_;

    std::mutex thumb_mutex_;
    std::map<std::string, std::string> thumbnails_;

    std::mutex id_mutex_;
    std::mt19937_64 id_engine_;

    std::unique_ptr<Http> http_;
};

/// Splits "host:port"; throws ParameterError on a malformed address.
std::pair<std::string, int> parse_bind_address(const std::string& address);

} // namespace wordspot
