#include "doctest.h"

#include "support.hpp"
#include "wordspot/errors.hpp"
#include "wordspot/eval.hpp"

#include "json.hpp"

#include <algorithm>

using namespace wordspot;

TEST_CASE("precision and recall by hand")
{
    const auto pr = precision_recall({1, 2, 3, 4}, {2, 4, 6});
    CHECK(pr.precision == 0.5);
    CHECK(pr.recall == doctest::Approx(2.0 / 3));
    const auto none = precision_recall({}, {1});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK_THROWS_AS(precision_recall({1}, {}), NoGroundTruthError);
}

TEST_CASE("feedback oracle judges the shown prefix by label")
{
    const auto& index = test::small_corpus();
    const auto& probe = index.entries()[0];
    const auto ranking = rank(make_query(probe.descriptor, Space::Original, index), index);
    const auto combined = feedback_oracle(ranking, 10, *probe.label, index, Strategy::Combined);
    REQUIRE(combined.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(combined[i].word_id == ranking.results[i].word_id);
        CHECK(combined[i].relevant == (index.find(ranking.results[i].word_id)->label == probe.label));
    }
    for (const auto& j : feedback_oracle(ranking, 10, *probe.label, index, Strategy::PositiveOnly))
        CHECK(j.relevant);
    for (const auto& j : feedback_oracle(ranking, 10, *probe.label, index, Strategy::NegativeOnly))
        CHECK(!j.relevant);
    CHECK_THROWS_AS(feedback_oracle(ranking, 10, "", index, Strategy::Combined), NoGroundTruthError);
}

TEST_CASE("eligible words: long enough and repeated")
{
    const auto& index = test::small_corpus();
    const auto words = eligible_query_words(index, 4);
    CHECK(std::is_sorted(words.begin(), words.end()));
    for (const auto& w : words) {
        CHECK(w.size() >= 4);
        const auto n = std::count_if(index.entries().begin(), index.entries().end(),
                                     [&](const WordEntry& e) { return e.label == w; });
        CHECK(n >= 2);
    }
}

TEST_CASE("baseline scores match an independent re-scoring")
{
    const auto& index = test::small_corpus();
    EvalConfig config;
    config.n_queries = 8;
    const auto report = run_experiment(index, config);
    REQUIRE(report.queries.size() == 8);
    double sum_p = 0;
    for (const auto& q : report.queries) {
        const auto* source = index.find(q.source_word_id);
        REQUIRE(source);
        CHECK(source->label == q.word);
        const auto ranking = rank(make_query(source->descriptor, Space::Original, index), index);
        std::size_t hits = 0, retrieved = 0, relevant = 0;
        for (const auto& r : ranking.results) {
            if (r.word_id == q.source_word_id)
                continue;
            const bool rel = index.find(r.word_id)->label == q.word;
            relevant += rel;
            if (r.rate >= 75.0) {
                ++retrieved;
                hits += rel;
            }
        }
        CHECK(q.relevant == relevant);
        CHECK(q.precision == doctest::Approx(retrieved ? double(hits) / retrieved : 0.0));
        CHECK(q.recall == doctest::Approx(double(hits) / relevant));
        CHECK(q.rounds.size() == 1);
        sum_p += q.precision;
    }
    CHECK(report.avg_precision == doctest::Approx(sum_p / 8));
}

TEST_CASE("feedback runs add a scored round per applied update")
{
    const auto& index = test::small_corpus();
    EvalConfig config;
    config.n_queries = 6;
    config.strategy = Strategy::Combined;
    config.rounds = 2;
    const auto report = run_experiment(index, config);
    for (const auto& q : report.queries) {
        CHECK(q.rounds.size() >= 1);
        CHECK(q.rounds.size() <= 3);
        CHECK(q.feedback_applied == (q.rounds.size() > 1));
        CHECK(q.precision == q.rounds.back().precision);
        CHECK(q.ranking_seconds.size() == q.rounds.size());
    }
}

TEST_CASE("same seed, same report; different seed, different queries")
{
    const auto& index = test::small_corpus();
    EvalConfig config;
    config.n_queries = 5;
    config.strategy = Strategy::PositiveOnly;
    const auto a = report_to_json(run_experiment(index, config));
    const auto b = report_to_json(run_experiment(index, config));
    CHECK(a == b);
    config.seed = 43;
    CHECK(report_to_json(run_experiment(index, config)) != a);

    const auto doc = nlohmann::json::parse(a);
    CHECK(doc.at("format") == "wordspot-eval-report");
    CHECK(!doc.at("queries")[0].contains("ranking_seconds"));
    CHECK(nlohmann::json::parse(report_to_json(run_experiment(index, config), true))
              .at("queries")[0]
              .contains("ranking_seconds"));
}

TEST_CASE("method names and comparisons")
{
    EvalConfig base;
    const auto pos = config_for_method(base, "positive");
    CHECK(pos.strategy == Strategy::PositiveOnly);
    CHECK(!pos.subspace);
    const auto pca = config_for_method(base, "pca-combined");
    CHECK(pca.strategy == Strategy::Combined);
    CHECK(pca.subspace);
    CHECK(config_for_method(base, "baseline").strategy == std::nullopt);
    CHECK(config_for_method(base, "pca-negative").method_name() == "pca-negative");
    CHECK_THROWS_AS(config_for_method(base, "fancy"), ParameterError);

    const auto& index = test::small_corpus();
    base.n_queries = 4;
    const auto cmp = run_methods(index, base, {"baseline", "pca-baseline"});
    REQUIRE(cmp.rows.size() == 2);
    CHECK(cmp.rows[0].method == "baseline");
    CHECK(cmp.rows[1].method == "pca-baseline");
    CHECK(comparison_table(cmp).find("pca-baseline") != std::string::npos);
    CHECK(cmp.reports[0].queries[0].word == cmp.reports[1].queries[0].word);
}

TEST_CASE("configuration errors")
{
    const auto& index = test::small_corpus();
    EvalConfig config;
    config.n_queries = 0;
    CHECK_THROWS_AS(run_experiment(index, config), ParameterError);
    config.n_queries = 100000;
    CHECK_THROWS_AS(run_experiment(index, config), GenerationError);
    config.n_queries = 2;
    config.rate_threshold = 120;
    CHECK_THROWS_AS(run_experiment(index, config), ParameterError);
    config.rate_threshold = 75;
    config.subspace = true;
    CHECK_THROWS_AS(run_experiment(index, config), SpaceError);
}

TEST_CASE("raising the rate threshold never grows the retrieved set")
{
    const auto& index = test::small_corpus();
    EvalConfig config;
    config.n_queries = 6;
    std::vector<EvalReport> reports;
    for (double theta : {0.0, 25.0, 50.0, 60.0, 75.0, 90.0, 100.0}) {
        config.rate_threshold = theta;
        reports.push_back(run_experiment(index, config));
    }
    for (std::size_t t = 1; t < reports.size(); ++t)
        for (std::size_t q = 0; q < 6; ++q) {
            const auto& lo = reports[t - 1].queries[q];
            const auto& hi = reports[t].queries[q];
            CHECK(hi.rounds.back().retrieved <= lo.rounds.back().retrieved);
            CHECK(hi.recall <= lo.recall);
            if (hi.rounds.back().retrieved > 0)
                CHECK(hi.precision >= lo.precision - 1e-12);
        }
}
