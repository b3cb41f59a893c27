#include "doctest.h"

#include "support.hpp"
#include "wordspot/errors.hpp"
#include "wordspot/feedback.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <random>

using namespace wordspot;

namespace {

// Direct formula: alpha*q0 + beta*mean(R) - gamma*mean(N), summed left to right.
std::vector<double> formula(const std::vector<double>& q0, const VectorSet& r, const VectorSet& n, double alpha,
                            double beta, double gamma)
{
    std::vector<double> out(q0.size());
    for (std::size_t k = 0; k < q0.size(); ++k) {
        long double pos = 0, neg = 0;
        for (const auto& v : r)
            pos += v[k];
        for (const auto& v : n)
            neg += v[k];
        long double q = static_cast<long double>(alpha) * q0[k];
        if (!r.empty())
            q += beta * pos / r.size();
        if (!n.empty())
            q -= gamma * neg / n.size();
        out[k] = static_cast<double>(q);
    }
    return out;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

VectorSet random_set(std::mt19937_64& rng, std::size_t count, std::size_t dim)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VectorSet set(count, std::vector<double>(dim));
    for (auto& v : set)
        for (auto& x : v)
            x = u(rng);
    return set;
}

QueryVector query_of(const CorpusIndex& index, std::uint64_t id)
{
    return make_query(index.find(id)->descriptor, Space::Original, index);
}

} // namespace

TEST_CASE("randomized Rocchio cases match the formula")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> w(0.0, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 1 + rng() % 93;
        const auto q0 = random_set(rng, 1, dim)[0];
        const auto r = random_set(rng, rng() % 6, dim);
        const auto n = random_set(rng, rng() % 6, dim);
        RocchioParams p;
        p.alpha = w(rng);
        p.beta = w(rng);
        p.gamma = w(rng);
        p.enforce_gamma_below_beta = false;
        if (r.empty() && n.empty())
            continue;
        const auto got = rocchio_combined({q0, Space::Original}, r, n, p).values;
        const auto want = formula(q0, r, n, p.alpha, p.beta, p.gamma);
        for (std::size_t k = 0; k < dim; ++k)
            REQUIRE(std::fabs(got[k] - want[k]) <= 1e-12);
    }
}

TEST_CASE("reduction identities hold bit for bit")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 1 + rng() % 93;
        const QueryVector q0{random_set(rng, 1, dim)[0], Space::Original};
        const auto r = random_set(rng, 1 + rng() % 5, dim);
        const auto n = random_set(rng, 1 + rng() % 5, dim);
        RocchioParams p{0.3 + (rng() % 100) / 50.0, 0.82, 0.25, Strategy::Combined, false};

        CHECK(bitwise_equal(rocchio_combined(q0, r, {}, p).values, rocchio_positive(q0, r, p.alpha, p.beta).values));
        CHECK(bitwise_equal(rocchio_combined(q0, {}, n, p).values, rocchio_negative(q0, n, p.alpha, p.gamma).values));

        p.gamma = p.beta;
        std::vector<double> scaled(dim);
        for (std::size_t k = 0; k < dim; ++k)
            scaled[k] = p.alpha * q0.values[k];
        CHECK(bitwise_equal(rocchio_combined(q0, r, r, p).values, scaled));
    }
}

TEST_CASE("update validation")
{
    const QueryVector q0{{0.5, 0.5}, Space::Original};
    CHECK_THROWS_AS(rocchio_positive(q0, {}, 1, 0.82), EmptyFeedbackError);
    CHECK_THROWS_AS(rocchio_negative(q0, {}, 1, 0.25), EmptyFeedbackError);
    CHECK_THROWS_AS(rocchio_combined(q0, {}, {}, {}), EmptyFeedbackError);
    CHECK_THROWS_AS(rocchio_positive(q0, {{1, 2, 3}}, 1, 0.82), DimensionError);
    CHECK_THROWS_AS(rocchio_positive(q0, {{1, 2}}, -1, 0.82), ParameterError);
    CHECK_THROWS_AS(rocchio_negative(q0, {{1, 2}}, 1, NAN), ParameterError);

    RocchioParams p;
    CHECK_NOTHROW(p.validate());
    p.gamma = p.beta;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p.enforce_gamma_below_beta = false;
    CHECK_NOTHROW(p.validate());
    CHECK_THROWS_AS(strategy_from_string("both"), ParameterError);
    CHECK(strategy_from_string(to_string(Strategy::Combined)) == Strategy::Combined);
}

TEST_CASE("update dispatches on strategy")
{
    const QueryVector q0{{1.0}, Space::Original};
    const VectorSet r{{3.0}}, n{{2.0}};
    RocchioParams p{1.0, 0.5, 0.25, Strategy::PositiveOnly, true};
    CHECK(rocchio_update(q0, r, n, p).values[0] == 2.5);
    p.strategy = Strategy::NegativeOnly;
    CHECK(rocchio_update(q0, r, n, p).values[0] == 0.5);
    p.strategy = Strategy::Combined;
    CHECK(rocchio_update(q0, r, n, p).values[0] == 2.0);
}

TEST_CASE("session rounds recompute from q0 with cumulative judgments")
{
    const CorpusIndex index(test::random_entries(100, 21));
    const auto q0 = query_of(index, index.entries()[0].word_id);
    RocchioParams params{1.0, 0.82, 0.25, Strategy::Combined, true};
    auto session = FeedbackSession::start("s", q0, index, params, 5);
    const auto shown0 = session.shown();
    REQUIRE(shown0.size() == 5);
    CHECK(shown0[0] == index.entries()[0].word_id);

    run_feedback_round(session, std::vector<Judgment>{{shown0[1], true}, {shown0[2], false}}, index);
    const auto shown1 = session.shown();
    run_feedback_round(session, std::vector<Judgment>{{shown1[3], true}}, index);
    CHECK(session.round_index() == 2);

    // Oracle: one update from q0 over all judgments so far.
    auto vec = [&](std::uint64_t id) {
        const auto& d = index.find(id)->descriptor;
        return std::vector<double>(d.begin(), d.end());
    };
    std::map<std::uint64_t, bool> judged{{shown0[1], true}, {shown0[2], false}};
    judged[shown1[3]] = true; // a later judgment wins
    VectorSet rel, nonrel;
    for (const auto& [id, relevant] : judged)
        (relevant ? rel : nonrel).push_back(vec(id));
    const auto want = formula(q0.values, rel, nonrel, 1.0, 0.82, 0.25);
    for (std::size_t k = 0; k < want.size(); ++k)
        CHECK(session.current_query().values[k] == doctest::Approx(want[k]).epsilon(1e-12));
    CHECK(session.latest_ranking() == rank(session.current_query(), index));
}

TEST_CASE("invalid rounds leave the session untouched")
{
    const CorpusIndex index(test::random_entries(60, 22));
    auto session = FeedbackSession::start("s", query_of(index, index.entries()[3].word_id), index, {}, 4);
    const auto shown = session.shown();
    std::uint64_t hidden = 0;
    for (const auto& e : index.entries())
        if (std::find(shown.begin(), shown.end(), e.word_id) == shown.end())
            hidden = e.word_id;

    CHECK_THROWS_AS(run_feedback_round(session, std::vector<Judgment>{}, index), EmptyFeedbackError);
    CHECK_THROWS_AS(run_feedback_round(session, std::vector<Judgment>{{hidden, true}}, index), JudgmentError);
    CHECK_THROWS_AS(run_feedback_round(session, std::vector<Judgment>{{shown[1], true}, {shown[1], false}}, index),
                    JudgmentError);
    // Positive-only with only non-relevant judgments.
    CHECK_THROWS_AS(run_feedback_round(session, std::vector<Judgment>{{shown[1], false}}, index),
                    EmptyFeedbackError);
    CHECK(session.round_index() == 0);
    CHECK(session.current_query() == session.original_query());

    auto negative = session.params();
    negative.strategy = Strategy::NegativeOnly;
    session.set_params(negative);
    CHECK_THROWS_AS(run_feedback_round(session, std::vector<Judgment>{{shown[1], true}}, index), EmptyFeedbackError);
    CHECK_NOTHROW(run_feedback_round(session, std::vector<Judgment>{{shown[1], false}, {shown[2], true}}, index));
    CHECK(session.round_index() == 1);
}

TEST_CASE("session JSON round trip continues identically")
{
    const CorpusIndex index(test::random_entries(80, 23));
    auto a = FeedbackSession::start("abc", query_of(index, index.entries()[5].word_id), index,
                                    {1.0, 0.82, 0.25, Strategy::Combined, true}, 6);
    run_feedback_round(a, std::vector<Judgment>{{a.shown()[1], true}, {a.shown()[4], false}}, index);

    const auto doc = session_to_json(a, "/tmp/idx.dirx");
    auto [b, path] = session_from_json(doc);
    CHECK(path == "/tmp/idx.dirx");
    CHECK(b.id() == "abc");
    CHECK(b.round_index() == 1);
    CHECK(b.params() == a.params());
    CHECK(b.shown() == a.shown());
    CHECK(b.current_query() == a.current_query());

    const std::vector<Judgment> next{{a.shown()[2], true}};
    CHECK(run_feedback_round(a, next, index) == run_feedback_round(b, next, index));

    CHECK_THROWS_AS(session_from_json("{}"), SessionFormatError);
    CHECK_THROWS_AS(session_from_json("not json"), SessionFormatError);
}
