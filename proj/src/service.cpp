#include "wordspot/service.hpp"

#include "wordspot/errors.hpp"
#include "wordspot/features.hpp"
#include "wordspot/image.hpp"

#include "httplib.h"
#include "json.hpp"

#include <spdlog/spdlog.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <set>
#include <thread>

namespace wordspot {

using nlohmann::json;

namespace {

// Errors raised by the service itself, outside the engine's taxonomy.
class HttpError : public Error
{
public:
    HttpError(int status, std::string code, const std::string& message)
        : Error(std::move(code), message), status_(status)
    {
    }
    int status() const { return status_; }

private:
    int status_;
};

ApiResponse json_response(int status, const json& body)
{
    return {status, "application/json", body.dump()};
}

ApiResponse error_response(int status, const std::string& code, const std::string& message)
{
    return json_response(status, {{"error", {{"code", code}, {"message", message}}}});
}

int status_for(const Error& e)
{
    if (auto* http = dynamic_cast<const HttpError*>(&e))
        return http->status();
    if (dynamic_cast<const JudgmentError*>(&e) || dynamic_cast<const EmptyFeedbackError*>(&e))
        return 422;
    if (dynamic_cast<const SpaceError*>(&e) || dynamic_cast<const EmptyIndexError*>(&e))
        return 409;
    if (dynamic_cast<const DegenerateSpectrumError*>(&e) || dynamic_cast<const InsufficientDataError*>(&e) ||
        dynamic_cast<const NumericalError*>(&e))
        return 422;
    return 400;
}

std::vector<std::string> split_path(const std::string& path)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start < path.size()) {
        const auto end = path.find('/', start);
        const auto part = path.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (!part.empty())
            parts.push_back(part);
        if (end == std::string::npos)
            break;
        start = end + 1;
    }
    return parts;
}

// Request options from a JSON body, or from query/form fields when the body
// is an image. Field values are parsed as JSON where possible.
json request_options(const ApiRequest& request)
{
    json options = json::object();
    if (!request.image && !request.body.empty()) {
        try {
            options = json::parse(request.body);
        } catch (const json::parse_error& e) {
            throw HttpError(400, "malformed_json", e.what());
        }
        if (!options.is_object())
            throw HttpError(400, "malformed_json", "request body must be a JSON object");
    }
    for (const auto& [key, value] : request.params) {
        if (key == "options" || options.contains(key))
            continue;
        const auto parsed = json::parse(value, nullptr, false);
        options[key] = parsed.is_discarded() ? json(value) : parsed;
    }
    if (auto it = request.params.find("options"); it != request.params.end()) {
        const auto extra = json::parse(it->second, nullptr, false);
        if (!extra.is_object())
            throw HttpError(400, "malformed_json", "options field must be a JSON object");
        options.update(extra);
    }
    return options;
}

template <typename T>
T option(const json& options, const char* key, T fallback)
{
    if (!options.contains(key) || options[key].is_null())
        return fallback;
    try {
        return options[key].get<T>();
    } catch (const json::exception&) {
        throw HttpError(400, "malformed_request", std::string("field '") + key + "' has the wrong type");
    }
}

RocchioParams params_from(const json& options, RocchioParams params)
{
    params.alpha = option(options, "alpha", params.alpha);
    params.beta = option(options, "beta", params.beta);
    params.gamma = option(options, "gamma", params.gamma);
    params.enforce_gamma_below_beta = option(options, "enforce_gamma_below_beta", params.enforce_gamma_below_beta);
    if (options.contains("strategy"))
        params.strategy = strategy_from_string(option<std::string>(options, "strategy", "positive"));
    params.validate();
    return params;
}

json params_json(const RocchioParams& p)
{
    return {{"strategy", to_string(p.strategy)},
            {"alpha", p.alpha},
            {"beta", p.beta},
            {"gamma", p.gamma},
            {"enforce_gamma_below_beta", p.enforce_gamma_below_beta}};
}

std::string content_hash(const std::string& bytes)
{
    const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
    const auto size = static_cast<uInt>(bytes.size());
    const auto crc = crc32(crc32(0L, Z_NULL, 0), data, size);
    const auto adler = adler32(adler32(0L, Z_NULL, 0), data, size);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%08lx%08lx", static_cast<unsigned long>(crc), static_cast<unsigned long>(adler));
    return buf;
}

} // namespace

struct Service::State
{
    std::shared_ptr<const CorpusIndex> index;
    std::string index_path;
    std::optional<std::filesystem::path> pages_dir;
    std::vector<std::filesystem::path> page_files;

    mutable std::mutex page_mutex;
    mutable std::map<std::uint64_t, std::shared_ptr<const PageImage>> pages;

    std::shared_ptr<const PageImage> page(std::uint64_t doc_id) const
    {
        if (doc_id >= page_files.size())
            return nullptr;
        std::lock_guard lock(page_mutex);
        auto& cached = pages[doc_id];
        if (!cached) {
            try {
                cached = std::make_shared<const PageImage>(read_netpbm(page_files[doc_id]));
            } catch (const Error& e) {
                spdlog::warn("thumbnail source {}: {}", page_files[doc_id].string(), e.what());
                return nullptr;
            }
        }
        return cached;
    }
};

struct Service::Slot
{
    std::mutex mutex;
    std::uint64_t generation = 0;
    std::shared_ptr<const State> state;
    std::optional<FeedbackSession> session;
    std::chrono::steady_clock::time_point created;
    std::chrono::steady_clock::time_point last_active;
};

struct Service::Http
{
    httplib::Server server;
    std::thread thread;
};

Service::Service(ServiceOptions options, Clock clock)
    : options_(std::move(options)), clock_(clock ? std::move(clock) : [] { return std::chrono::steady_clock::now(); }),
      id_engine_(std::random_device{}())
{
}

Service::~Service()
{
    stop();
}

void Service::set_index(CorpusIndex index, std::string index_path, std::optional<std::filesystem::path> pages_dir)
{
    auto state = std::make_shared<State>();
    state->index = std::make_shared<const CorpusIndex>(std::move(index));
    state->index_path = std::move(index_path);
    state->pages_dir = std::move(pages_dir);
    if (state->pages_dir) {
        std::error_code ec;
        for (const auto& f : std::filesystem::directory_iterator(*state->pages_dir, ec))
            if (f.is_regular_file())
                state->page_files.push_back(f.path());
        if (ec)
            throw HttpError(400, "bad_pages_dir", "cannot list " + state->pages_dir->string());
        std::sort(state->page_files.begin(), state->page_files.end());
    }
    install(std::move(state));
}

void Service::install(std::shared_ptr<const State> state)
{
    std::lock_guard lock(state_mutex_);
    state_ = std::move(state);
    ++generation_;
    sessions_.clear();
}

std::shared_ptr<const Service::State> Service::snapshot()
{
    std::lock_guard lock(state_mutex_);
    return state_;
}

void Service::purge_expired()
{
    const auto now = clock_();
    std::lock_guard lock(state_mutex_);
    std::erase_if(sessions_, [&](const auto& item) { return now - item.second->last_active > options_.session_timeout; });
}

std::shared_ptr<Service::Slot> Service::find_session(const std::string& id)
{
    const auto now = clock_();
    std::lock_guard lock(state_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end())
        return nullptr;
    if (now - it->second->last_active > options_.session_timeout) {
        sessions_.erase(it);
        return nullptr;
    }
    it->second->last_active = now;
    return it->second;
}

std::size_t Service::session_count()
{
    purge_expired();
    std::lock_guard lock(state_mutex_);
    return sessions_.size();
}

std::string Service::new_session_id()
{
    std::lock_guard lock(id_mutex_);
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(id_engine_()),
                  static_cast<unsigned long long>(id_engine_()));
    return buf;
}

std::string Service::thumbnail_ref(const State& state, const WordEntry& entry)
{
    const auto page = state.page(entry.doc_id);
    if (!page || !page->contains(entry.box))
        return {};
    auto bytes = encode_pbm(page->crop(entry.box));
    auto hash = content_hash(bytes);
    std::lock_guard lock(thumb_mutex_);
    thumbnails_.try_emplace(hash, std::move(bytes));
    return "/v1/thumbnails/" + hash;
}

std::string Service::session_json(const Slot& slot)
{
    const auto& session = *slot.session;
    const auto& index = *slot.state->index;
    auto results_json = [&](const RankedList& ranking) {
        json results = json::array();
        for (std::size_t i = 0; i < std::min(session.shown_per_round(), ranking.results.size()); ++i) {
            const auto& r = ranking.results[i];
            const auto* entry = index.find(r.word_id);
            const auto thumb = thumbnail_ref(*slot.state, *entry);
            results.push_back({{"rank", i + 1},
                               {"word_id", r.word_id},
                               {"doc_id", entry->doc_id},
                               {"box", {{"x", entry->box.x}, {"y", entry->box.y}, {"w", entry->box.w}, {"h", entry->box.h}}},
                               {"distance", r.distance},
                               {"rate", r.rate},
                               {"thumbnail", thumb.empty() ? json(nullptr) : json(thumb)}});
        }
        return results;
    };
    json history = json::array();
    history.push_back({{"round", 0}, {"judgments", json::array()}, {"results", results_json(session.initial_ranking())}});
    for (std::size_t r = 0; r < session.rounds().size(); ++r) {
        json judged = json::array();
        for (const auto& j : session.rounds()[r].judgments)
            judged.push_back({{"word_id", j.word_id}, {"relevant", j.relevant}});
        history.push_back({{"round", r + 1}, {"judgments", judged}, {"results", results_json(session.rounds()[r].ranking)}});
    }
    const auto now = clock_();
    json out = {
        {"session_id", session.id()},
        {"round", session.round_index()},
        {"space", to_string(session.space())},
        {"params", params_json(session.params())},
        {"shown_per_round", session.shown_per_round()},
        {"max_distance", session.latest_ranking().max_distance},
        {"results", history.back()["results"]},
        {"history", history},
        {"idle_seconds", std::chrono::duration<double>(now - slot.last_active).count()},
    };
    return out.dump();
}

ApiResponse Service::handle(const ApiRequest& request)
{
    try {
        purge_expired();
        const auto parts = split_path(request.path);
        if (parts.size() < 2 || parts[0] != "v1")
            throw HttpError(404, "not_found", "no route for " + request.path);
        const auto& method = request.method;
        if (parts.size() == 2 && parts[1] == "search" && method == "POST")
            return search(request);
        if (parts.size() == 4 && parts[1] == "sessions" && parts[3] == "feedback" && method == "POST")
            return feedback(parts[2], request);
        if (parts.size() == 3 && parts[1] == "sessions" && method == "GET")
            return get_session(parts[2]);
        if (parts.size() == 3 && parts[1] == "admin") {
            if (parts[2] == "index" && method == "POST")
                return admin_index(request);
            if (parts[2] == "pca" && method == "POST")
                return admin_pca(request);
            if (parts[2] == "stats" && method == "GET")
                return stats();
        }
        if (parts.size() == 3 && parts[1] == "thumbnails" && method == "GET")
            return thumbnail(parts[2]);
        throw HttpError(404, "not_found", "no route for " + method + " " + request.path);
    } catch (const Error& e) {
        return error_response(status_for(e), e.code(), e.what());
    } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", request.method, request.path, e.what());
        return error_response(500, "internal_error", e.what());
    }
}

ApiResponse Service::search(const ApiRequest& request)
{
    const auto options = request_options(request);
    const auto top = option<std::size_t>(options, "top", options_.default_top);
    if (top == 0)
        throw HttpError(400, "invalid_parameters", "top must be at least 1");
    const auto space = space_from_string(option<std::string>(options, "space", "original"));
    const auto params = params_from(options, RocchioParams{});
    const auto word_id = options.contains("word_id") ? std::optional(option<std::uint64_t>(options, "word_id", 0))
                                                     : std::nullopt;
    if (!request.image && !word_id)
        throw HttpError(400, "missing_query", "send an image upload or a word_id");

    std::optional<Descriptor> uploaded;
    if (request.image) {
        const auto image = decode_netpbm(*request.image);
        uploaded = describe_word_image(image);
    }

    // Retry if an admin swap lands between ranking and registration, so a
    // session never outlives the index it was built on.
    for (int attempt = 0; attempt < 3; ++attempt) {
        std::shared_ptr<const State> state;
        std::uint64_t generation = 0;
        {
            std::lock_guard lock(state_mutex_);
            state = state_;
            generation = generation_;
        }
        if (!state)
            throw HttpError(409, "no_index", "no index is loaded");
        const auto& index = *state->index;

        Descriptor descriptor{};
        if (uploaded) {
            descriptor = *uploaded;
        } else {
            const auto* entry = index.find(*word_id);
            if (!entry)
                throw HttpError(404, "unknown_word", "word " + std::to_string(*word_id) + " is not in the index");
            descriptor = entry->descriptor;
        }

        auto slot = std::make_shared<Slot>();
        slot->state = state;
        slot->generation = generation;
        auto id = new_session_id();
        slot->session.emplace(FeedbackSession::start(id, make_query(descriptor, space, index), index, params, top));
        slot->session->source_descriptor = descriptor;
        slot->session->refit_on_positives = option<std::size_t>(options, "refit_on_positives", 0);
        slot->created = slot->last_active = clock_();

        std::lock_guard lock(state_mutex_);
        if (generation != generation_)
            continue;
        sessions_.emplace(id, slot);
        std::lock_guard slot_lock(slot->mutex);
        return {200, "application/json", session_json(*slot)};
    }
    throw HttpError(409, "index_changed", "the index changed while the search ran");
}

ApiResponse Service::feedback(const std::string& id, const ApiRequest& request)
{
    const auto options = request_options(request);
    const auto slot = find_session(id);
    if (!slot)
        throw HttpError(404, "unknown_session", "no session " + id);
    std::lock_guard slot_lock(slot->mutex);
    {
        std::lock_guard lock(state_mutex_);
        if (slot->generation != generation_)
            throw HttpError(404, "unknown_session", "no session " + id);
    }

    if (!options.contains("judgments") || !options["judgments"].is_array())
        throw HttpError(400, "malformed_request", "body needs a judgments array");
    std::vector<Judgment> judgments;
    for (const auto& j : options["judgments"]) {
        if (!j.is_object() || !j.contains("word_id") || !j.contains("relevant"))
            throw HttpError(400, "malformed_request", "each judgment needs word_id and relevant");
        judgments.push_back({option<std::uint64_t>(j, "word_id", 0), option<bool>(j, "relevant", false)});
    }

    auto& session = *slot->session;
    const auto previous = session.params();
    session.set_params(params_from(options, previous));
    try {
        run_feedback_round(session, judgments, *slot->state->index);
    } catch (...) {
        session.set_params(previous);
        throw;
    }
    return {200, "application/json", session_json(*slot)};
}

ApiResponse Service::get_session(const std::string& id)
{
    const auto slot = find_session(id);
    if (!slot)
        throw HttpError(404, "unknown_session", "no session " + id);
    std::lock_guard slot_lock(slot->mutex);
    return {200, "application/json", session_json(*slot)};
}

ApiResponse Service::admin_index(const ApiRequest& request)
{
    std::unique_lock gate(admin_gate_, std::try_to_lock);
    if (!gate.owns_lock())
        throw HttpError(409, "admin_busy", "another admin operation is running");
    if (options_.admin_started)
        options_.admin_started();
    const auto options = request_options(request);
    const auto path = option<std::string>(options, "path", "");
    if (path.empty())
        throw HttpError(400, "malformed_request", "body needs an index path");
    auto index = load_index(path);
    std::optional<std::filesystem::path> pages;
    if (auto dir = option<std::string>(options, "pages", ""); !dir.empty())
        pages = dir;
    spdlog::info("loaded index {} ({} entries)", path, index.size());
    set_index(std::move(index), path, pages);
    return stats();
}

ApiResponse Service::admin_pca(const ApiRequest& request)
{
    std::unique_lock gate(admin_gate_, std::try_to_lock);
    if (!gate.owns_lock())
        throw HttpError(409, "admin_busy", "another admin operation is running");
    if (options_.admin_started)
        options_.admin_started();
    const auto options = request_options(request);
    const auto current = snapshot();
    if (!current)
        throw HttpError(409, "no_index", "no index is loaded");

    PcaOptions pca;
    pca.variance_target = option(options, "variance", pca.variance_target);
    if (options.contains("fixed_m") && !options["fixed_m"].is_null())
        pca.fixed_dimension = option<std::size_t>(options, "fixed_m", 0);
    pca.whiten = option(options, "whiten", pca.whiten);
    if (!(pca.variance_target > 0 && pca.variance_target <= 1))
        throw HttpError(400, "invalid_parameters", "variance must lie in (0, 1]");

    auto fitted = fit_index_pca(*current->index, pca);
    auto state = std::make_shared<State>();
    state->index = std::make_shared<const CorpusIndex>(std::move(fitted));
    state->index_path = current->index_path;
    state->pages_dir = current->pages_dir;
    state->page_files = current->page_files;
    install(std::move(state));
    return stats();
}

ApiResponse Service::stats()
{
    const auto state = snapshot();
    json out = {{"loaded", state != nullptr},
                {"session_timeout_seconds", options_.session_timeout.count()},
                {"sessions", session_count()}};
    if (!state) {
        out["entries"] = 0;
        out["space"] = "original";
        out["pca"] = nullptr;
        return json_response(200, out);
    }
    const auto& index = *state->index;
    std::set<std::uint64_t> docs;
    for (const auto& e : index.entries())
        docs.insert(e.doc_id);
    out["entries"] = index.size();
    out["documents"] = docs.size();
    out["index_path"] = state->index_path;
    out["format_version"] = index.format_version();
    out["thumbnails"] = !state->page_files.empty();
    if (const auto& model = index.pca()) {
        out["space"] = "subspace";
        out["pca"] = {{"m", model->dimension()},
                      {"source_dimension", model->source_dimension()},
                      {"whitened", model->whitened},
                      {"retained_variance", retained_variance(*model)},
                      {"reconstruction_error", reconstruction_error(*model)}};
    } else {
        out["space"] = "original";
        out["pca"] = nullptr;
    }
    return json_response(200, out);
}

ApiResponse Service::thumbnail(const std::string& hash)
{
    std::lock_guard lock(thumb_mutex_);
    const auto it = thumbnails_.find(hash);
    if (it == thumbnails_.end())
        throw HttpError(404, "unknown_thumbnail", "no thumbnail " + hash);
    return {200, "image/x-portable-bitmap", it->second};
}

namespace {

ApiRequest to_api_request(const httplib::Request& req)
{
    ApiRequest out;
    out.method = req.method;
    out.path = req.path;
    for (const auto& [key, value] : req.params)
        out.params.emplace(key, value);
    if (req.is_multipart_form_data()) {
        for (const auto& [name, item] : req.files) {
            if (name == "image")
                out.image = item.content;
            else
                out.params[name] = item.content;
        }
        return out;
    }
    const auto type = req.get_header_value("Content-Type");
    if (type.starts_with("image/") || type.starts_with("application/octet-stream"))
        out.image = req.body;
    else
        out.body = req.body;
    return out;
}

} // namespace

void Service::mount()
{
    if (http_)
        return;
    http_ = std::make_unique<Http>();
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const auto reply = handle(to_api_request(req));
        res.status = reply.status;
        res.set_content(reply.body, reply.content_type);
    };
    http_->server.Get(".*", route);
    http_->server.Post(".*", route);
}

bool Service::listen(const std::string& host, int port)
{
    mount();
    if (port == 0) {
        const int bound = http_->server.bind_to_any_port(host);
        if (bound < 0)
            return false;
        return http_->server.listen_after_bind();
    }
    return http_->server.listen(host, port);
}

int Service::listen_in_background(const std::string& host)
{
    mount();
    const int port = http_->server.bind_to_any_port(host);
    if (port < 0)
        return -1;
    http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return port;
}

void Service::stop()
{
    if (!http_)
        return;
    http_->server.stop();
    if (http_->thread.joinable())
        http_->thread.join();
}

std::pair<std::string, int> parse_bind_address(const std::string& address)
{
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
        throw ParameterError("bind address must look like host:port, got '" + address + "'");
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(address.substr(colon + 1), &used);
        if (used != address.size() - colon - 1)
            throw ParameterError("bad port");
    } catch (const std::exception&) {
        throw ParameterError("bind address must look like host:port, got '" + address + "'");
    }
    if (port < 0 || port > 65535)
        throw ParameterError("port out of range in '" + address + "'");
    return {address.substr(0, colon), port};
}

} // namespace wordspot
