#include "doctest.h"

#include "support.hpp"
#include "wordspot/errors.hpp"
#include "wordspot/service.hpp"
#include "wordspot/synthetic.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <filesystem>
#include <future>

using namespace wordspot;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Fixture
{
    fs::path dir;
    fs::path index_path;
    fs::path pages_dir;
    SyntheticCorpus corpus;
    CorpusIndex index;

    Fixture()
    {
        dir = fs::temp_directory_path() / "wordspot_service_test";
        fs::remove_all(dir);
        pages_dir = dir / "pages";
        fs::create_directories(pages_dir);
        SyntheticOptions options;
        options.words_per_page = 40;
        corpus = generate_synthetic_corpus(test::source_text(), 4, 17, options);
        for (std::size_t d = 0; d < corpus.pages.size(); ++d)
            write_pbm(pages_dir / ("page_" + std::to_string(d) + ".pbm"), corpus.pages[d]);
        index = build_index(corpus.pages, corpus.labels);
        index_path = dir / "index.dirx";
        save_index(index, index_path);
    }
    ~Fixture() { fs::remove_all(dir); }
};

Fixture& fixture()
{
    static Fixture f;
    return f;
}

ApiRequest post(std::string path, json body)
{
    return {"POST", std::move(path), body.dump(), std::nullopt, {}};
}

ApiRequest get(std::string path)
{
    return {"GET", std::move(path), "", std::nullopt, {}};
}

json body_of(const ApiResponse& r)
{
    return json::parse(r.body);
}

std::string error_code(const ApiResponse& r)
{
    return body_of(r).at("error").at("code").get<std::string>();
}

struct FakeClock
{
    std::shared_ptr<std::atomic<long>> seconds = std::make_shared<std::atomic<long>>(0);
    Service::Clock clock() const
    {
        auto s = seconds;
        return [s] { return std::chrono::steady_clock::time_point(std::chrono::seconds(s->load())); };
    }
};

} // namespace

TEST_CASE("no index: 409 with a code")
{
    Service service;
    const auto r = service.handle(post("/v1/search", {{"word_id", 1}}));
    CHECK(r.status == 409);
    CHECK(error_code(r) == "no_index");
    const auto pca = service.handle(post("/v1/admin/pca", json::object()));
    CHECK(pca.status == 409);
    const auto stats = body_of(service.handle(get("/v1/admin/stats")));
    CHECK(stats.at("loaded") == false);
    CHECK(stats.at("session_timeout_seconds") == 1800);
    CHECK(service.handle(get("/v1/nothing/here")).status == 404);
}

TEST_CASE("search by word id opens a session whose results mirror rank()")
{
    auto& f = fixture();
    Service service;
    service.set_index(f.index, f.index_path.string(), f.pages_dir);
    const std::uint64_t probe = 12;
    const auto r = service.handle(post("/v1/search", {{"word_id", probe}, {"top", 5}}));
    REQUIRE(r.status == 200);
    const auto body = body_of(r);
    CHECK(body.at("round") == 0);
    CHECK(body.at("space") == "original");
    const auto& results = body.at("results");
    REQUIRE(results.size() == 5);

    const auto expected = rank(make_query(f.index.find(probe)->descriptor, Space::Original, f.index), f.index);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(results[i].at("rank") == i + 1);
        CHECK(results[i].at("word_id") == expected.results[i].word_id);
        CHECK(results[i].at("rate").get<double>() == expected.results[i].rate);
        CHECK(results[i].at("distance").get<double>() == expected.results[i].distance);
    }
    CHECK(results[0].at("rate") == 100.0);

    // Thumbnail is the P4 crop of the word box on its page.
    const auto thumb_path = results[0].at("thumbnail").get<std::string>();
    const auto thumb = service.handle(get(thumb_path));
    REQUIRE(thumb.status == 200);
    CHECK(thumb.content_type == "image/x-portable-bitmap");
    const auto* entry = f.index.find(probe);
    CHECK(decode_netpbm(thumb.body) == f.corpus.pages[entry->doc_id].crop(entry->box));
    CHECK(service.handle(get("/v1/thumbnails/deadbeef")).status == 404);

    const auto id = body.at("session_id").get<std::string>();
    const auto again = body_of(service.handle(get("/v1/sessions/" + id)));
    CHECK(again.at("results") == results);
    CHECK(service.handle(get("/v1/sessions/nope")).status == 404);
    CHECK(service.handle(post("/v1/search", {{"word_id", 999999}})).status == 404);
}

TEST_CASE("uploaded images: accepted, or rejected with bad_image")
{
    auto& f = fixture();
    Service service;
    service.set_index(f.index);
    ApiRequest upload{"POST", "/v1/search", "", encode_pbm(render_word("library", {2, false})), {}};
    const auto ok = service.handle(upload);
    CHECK(ok.status == 200);
    CHECK(body_of(ok).at("results").size() == 10);

    upload.image = "P7 not an image";
    const auto bad = service.handle(upload);
    CHECK(bad.status == 400);
    CHECK(error_code(bad) == "bad_image");

    upload.image = encode_pbm(PageImage(5, 5));
    CHECK(service.handle(upload).status == 400);

    CHECK(error_code(service.handle(post("/v1/search", json::object()))) == "missing_query");
    CHECK(error_code(service.handle({"POST", "/v1/search", "{oops", std::nullopt, {}})) == "malformed_json");
}

TEST_CASE("feedback rounds and judgment errors")
{
    auto& f = fixture();
    Service service;
    service.set_index(f.index);
    const auto start = body_of(service.handle(
        post("/v1/search", {{"word_id", 3}, {"strategy", "combined"}, {"top", 6}})));
    const auto id = start.at("session_id").get<std::string>();
    const auto shown = start.at("results");
    const auto url = "/v1/sessions/" + id + "/feedback";

    const auto r = service.handle(post(url, {{"judgments",
                                              {{{"word_id", shown[1].at("word_id")}, {"relevant", true}},
                                               {{"word_id", shown[2].at("word_id")}, {"relevant", false}}}}}));
    REQUIRE(r.status == 200);
    const auto body = body_of(r);
    CHECK(body.at("round") == 1);
    CHECK(body.at("history").size() == 2);
    CHECK(body.at("history")[0].at("results") == shown);
    CHECK(body.at("params").at("strategy") == "combined");

    // Oracle: a local session fed the same judgments.
    auto local = FeedbackSession::start("x", make_query(f.index.find(3)->descriptor, Space::Original, f.index),
                                        f.index, {1.0, 0.82, 0.25, Strategy::Combined, true}, 6);
    const auto ranking = run_feedback_round(
        local,
        std::vector<Judgment>{{shown[1].at("word_id").get<std::uint64_t>(), true},
                              {shown[2].at("word_id").get<std::uint64_t>(), false}},
        f.index);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(body.at("results")[i].at("word_id") == ranking.results[i].word_id);

    const auto unseen = service.handle(post(url, {{"judgments", {{{"word_id", 999999}, {"relevant", true}}}}}));
    CHECK(unseen.status == 422);
    CHECK(error_code(unseen) == "invalid_judgment");
    CHECK(service.handle(post(url, {{"judgments", json::array()}})).status == 422);
    CHECK(service.handle(post(url, {{"judgments", {{{"word_id", body.at("results")[0].at("word_id")},
                                                    {"relevant", false}}}},
                                    {"strategy", "positive"}}))
              .status == 422);
    CHECK(service.handle(post(url, {{"nothing", 1}})).status == 400);
    // A failed round keeps the previous parameters.
    CHECK(body_of(service.handle(get("/v1/sessions/" + id))).at("params").at("strategy") == "combined");
    CHECK(service.handle(post("/v1/sessions/nope/feedback", {{"judgments", json::array()}})).status == 404);
}

TEST_CASE("sessions expire after the idle timeout")
{
    auto& f = fixture();
    FakeClock clock;
    ServiceOptions options;
    options.session_timeout = std::chrono::seconds(60);
    Service service(options, clock.clock());
    service.set_index(f.index);
    const auto id = body_of(service.handle(post("/v1/search", {{"word_id", 1}}))).at("session_id").get<std::string>();

    *clock.seconds = 50;
    CHECK(service.handle(get("/v1/sessions/" + id)).status == 200); // touch resets idle time
    *clock.seconds = 100;
    CHECK(service.handle(get("/v1/sessions/" + id)).status == 200);
    *clock.seconds = 161;
    CHECK(service.handle(get("/v1/sessions/" + id)).status == 404);
    CHECK(service.session_count() == 0);
}

TEST_CASE("admin mutations swap the index and invalidate sessions")
{
    auto& f = fixture();
    Service service;
    const auto loaded = service.handle(post("/v1/admin/index", {{"path", f.index_path.string()}}));
    REQUIRE(loaded.status == 200);
    CHECK(body_of(loaded).at("entries") == f.index.size());
    CHECK(body_of(loaded).at("documents") == 4);

    const auto id = body_of(service.handle(post("/v1/search", {{"word_id", 2}}))).at("session_id").get<std::string>();
    CHECK(service.session_count() == 1);
    CHECK(service.handle(post("/v1/search", {{"word_id", 2}, {"space", "subspace"}})).status == 409);

    const auto fitted = service.handle(post("/v1/admin/pca", {{"variance", 0.9}}));
    REQUIRE(fitted.status == 200);
    const auto stats = body_of(fitted);
    CHECK(stats.at("space") == "subspace");
    CHECK(stats.at("pca").at("whitened") == true);
    CHECK(stats.at("pca").at("retained_variance").get<double>() >= 0.9);
    CHECK(service.session_count() == 0);
    CHECK(service.handle(get("/v1/sessions/" + id)).status == 404);

    const auto sub = service.handle(post("/v1/search", {{"word_id", 2}, {"space", "subspace"}}));
    REQUIRE(sub.status == 200);
    CHECK(body_of(sub).at("results")[0].at("word_id") == 2);

    CHECK(service.handle(post("/v1/admin/pca", {{"variance", 1.5}})).status == 400);
    CHECK(service.handle(post("/v1/admin/index", {{"path", "/nonexistent.dirx"}})).status == 400);
    CHECK(body_of(service.handle(get("/v1/admin/stats"))).at("entries") == f.index.size());
}

TEST_CASE("concurrent admin operations get 409")
{
    auto& f = fixture();
    Service* self = nullptr;
    std::optional<ApiResponse> competing;
    ServiceOptions options;
    options.admin_started = [&] {
        if (!competing)
            competing = std::async(std::launch::async, [&] {
                            return self->handle(post("/v1/admin/pca", json::object()));
                        }).get();
    };
    Service service(options);
    self = &service;
    service.set_index(f.index);
    const auto first = service.handle(post("/v1/admin/pca", json::object()));
    CHECK(first.status == 200);
    REQUIRE(competing);
    CHECK(competing->status == 409);
    CHECK(error_code(*competing) == "admin_busy");
}

TEST_CASE("HTTP transport end to end")
{
    auto& f = fixture();
    Service service;
    service.set_index(f.index, f.index_path.string(), f.pages_dir);
    const int port = service.listen_in_background();
    REQUIRE(port > 0);
    httplib::Client client("127.0.0.1", port);

    auto search = client.Post("/v1/search", json{{"word_id", 7}}.dump(), "application/json");
    REQUIRE(search);
    CHECK(search->status == 200);
    const auto body = json::parse(search->body);
    const auto id = body.at("session_id").get<std::string>();

    httplib::MultipartFormDataItems items = {
        {"image", encode_pbm(render_word("search", {3, true})), "word.pbm", "image/x-portable-bitmap"},
        {"options", json{{"top", 3}}.dump(), "", "application/json"},
    };
    auto upload = client.Post("/v1/search", items);
    REQUIRE(upload);
    CHECK(upload->status == 200);
    CHECK(json::parse(upload->body).at("results").size() == 3);

    auto raw = client.Post("/v1/search", "P5 garbage", "image/x-portable-graymap");
    REQUIRE(raw);
    CHECK(raw->status == 400);

    auto session = client.Get("/v1/sessions/" + id);
    REQUIRE(session);
    CHECK(session->status == 200);

    auto thumb = client.Get(body.at("results")[0].at("thumbnail").get<std::string>());
    REQUIRE(thumb);
    CHECK(thumb->status == 200);
    CHECK(thumb->get_header_value("Content-Type") == "image/x-portable-bitmap");

    auto stats = client.Get("/v1/admin/stats");
    REQUIRE(stats);
    CHECK(json::parse(stats->body).at("thumbnails") == true);
    service.stop();
}

TEST_CASE("bind address parsing")
{
    CHECK(parse_bind_address("0.0.0.0:9000") == std::pair<std::string, int>("0.0.0.0", 9000));
    CHECK(parse_bind_address("localhost:1") == std::pair<std::string, int>("localhost", 1));
    CHECK_THROWS_AS(parse_bind_address("nohost"), ParameterError);
    CHECK_THROWS_AS(parse_bind_address("h:99999"), ParameterError);
    CHECK_THROWS_AS(parse_bind_address("h:abc"), ParameterError);
}
