#include "wordspot/eval.hpp"

#include "wordspot/errors.hpp"
#include "wordspot/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

namespace wordspot {

using nlohmann::json;

namespace {

constexpr int kReportVersion = 1;

template <typename F>
auto timed(double& seconds, F&& f)
{
    const auto start = std::chrono::steady_clock::now();
    auto result = f();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

RoundMetrics score(const RankedList& ranking, double threshold, std::uint64_t source,
                   const std::set<std::uint64_t>& relevant)
{
    std::set<std::uint64_t> retrieved;
    for (const auto& r : ranking.results) {
        if (r.rate < threshold)
            break; // rates are non-increasing down the list
        if (r.word_id != source)
            retrieved.insert(r.word_id);
    }
    const auto pr = precision_recall(retrieved, relevant);
    return {pr.precision, pr.recall, retrieved.size()};
}

json config_to_json(const EvalConfig& c)
{
    return {
        {"method", c.method_name()},
        {"n_queries", c.n_queries},
        {"shown_per_round", c.shown_per_round},
        {"rounds", c.strategy ? c.rounds : 0},
        {"rate_threshold", c.rate_threshold},
        {"strategy", c.strategy ? std::string(to_string(*c.strategy)) : std::string("none")},
        {"alpha", c.params.alpha},
        {"beta", c.params.beta},
        {"gamma", c.params.gamma},
        {"subspace", c.subspace},
        {"seed", c.seed},
        {"min_word_length", c.min_word_length},
        {"self_match_excluded", true},
    };
}

json report_json(const EvalReport& report, bool include_timings)
{
    json queries = json::array();
    for (const auto& q : report.queries) {
        json rounds = json::array();
        for (const auto& r : q.rounds)
            rounds.push_back({{"precision", r.precision}, {"recall", r.recall}, {"retrieved", r.retrieved}});
        json item = {
            {"word", q.word},
            {"source_word_id", q.source_word_id},
            {"relevant", q.relevant},
            {"feedback_applied", q.feedback_applied},
            {"precision", q.precision},
            {"recall", q.recall},
            {"rounds", rounds},
        };
        if (include_timings)
            item["ranking_seconds"] = q.ranking_seconds;
        queries.push_back(std::move(item));
    }
    json out = {
        {"format", "wordspot-eval-report"},
        {"version", kReportVersion},
        {"config", config_to_json(report.config)},
        {"avg_precision", report.avg_precision},
        {"avg_recall", report.avg_recall},
        {"queries", queries},
    };
    if (include_timings)
        out["mean_ranking_seconds"] = report.mean_ranking_seconds();
    return out;
}

} // namespace

PrecisionRecall precision_recall(const std::set<std::uint64_t>& retrieved, const std::set<std::uint64_t>& relevant)
{
    if (relevant.empty())
        throw NoGroundTruthError("precision/recall needs a non-empty relevant set");
    std::size_t hits = 0;
    for (auto id : retrieved)
        hits += relevant.contains(id) ? 1 : 0;
    PrecisionRecall pr;
    pr.precision = retrieved.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(retrieved.size());
    pr.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    return pr;
}

std::vector<Judgment> feedback_oracle(const RankedList& ranking, std::size_t shown, const std::string& query_label,
                                      const CorpusIndex& index, Strategy strategy)
{
    if (query_label.empty())
        throw NoGroundTruthError("query has no label");
    std::vector<Judgment> judgments;
    for (std::size_t i = 0; i < std::min(shown, ranking.results.size()); ++i) {
        const auto id = ranking.results[i].word_id;
        const auto* entry = index.find(id);
        if (!entry || !entry->label)
            throw NoGroundTruthError("word " + std::to_string(id) + " has no ground-truth label");
        const bool relevant = *entry->label == query_label;
        if ((relevant && strategy == Strategy::NegativeOnly) || (!relevant && strategy == Strategy::PositiveOnly))
            continue;
        judgments.push_back({id, relevant});
    }
    return judgments;
}

void EvalConfig::validate() const
{
    if (n_queries < 1)
        throw ParameterError("n_queries must be at least 1");
    if (shown_per_round < 1)
        throw ParameterError("shown_per_round must be at least 1");
    if (!(rate_threshold >= 0 && rate_threshold <= 100))
        throw ParameterError("rate threshold must lie in [0, 100]");
    params.validate();
}

std::string EvalConfig::method_name() const
{
    std::string name = strategy ? std::string(to_string(*strategy)) : std::string("baseline");
    return subspace ? "pca-" + name : name;
}

double EvalReport::mean_ranking_seconds() const
{
    double total = 0;
    std::size_t n = 0;
    for (const auto& q : queries) {
        for (double s : q.ranking_seconds) {
            total += s;
            ++n;
        }
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::vector<std::string> eligible_query_words(const CorpusIndex& index, std::size_t min_word_length)
{
    std::map<std::string, std::size_t> counts;
    for (const auto& e : index.entries())
        if (e.label && e.label->size() >= min_word_length)
            ++counts[*e.label];
    std::vector<std::string> words;
    for (const auto& [word, n] : counts)
        if (n >= 2)
            words.push_back(word);
    return words;
}

EvalReport run_experiment(const CorpusIndex& index, const EvalConfig& config)
{
    config.validate();
    const Space space = config.subspace ? Space::Subspace : Space::Original;
    if (config.subspace && !index.pca())
        throw SpaceError("subspace evaluation needs a PCA model on the index");

    auto words = eligible_query_words(index, config.min_word_length);
    if (words.size() < config.n_queries)
        throw GenerationError("only " + std::to_string(words.size()) + " eligible query words, need " +
                              std::to_string(config.n_queries));

    std::map<std::string, std::vector<std::size_t>> occurrences;
    for (std::size_t pos = 0; pos < index.size(); ++pos) {
        const auto& label = index.entries()[pos].label;
        if (label)
            occurrences[*label].push_back(pos);
    }

    Rng rng(config.seed);
    rng.shuffle(words);
    words.resize(config.n_queries);

    RocchioParams params = config.params;
    if (config.strategy)
        params.strategy = *config.strategy;

    EvalReport report;
    report.config = config;
    for (const auto& word : words) {
        const auto& occ = occurrences.at(word);
        const auto source_pos = occ[rng.below(occ.size())];
        const auto& source = index.entries()[source_pos];

        QueryOutcome outcome;
        outcome.word = word;
        outcome.source_word_id = source.word_id;
        std::set<std::uint64_t> relevant;
        for (auto pos : occ)
            if (pos != source_pos)
                relevant.insert(index.entries()[pos].word_id);
        outcome.relevant = relevant.size();

        auto q0 = make_query(source.descriptor, space, index);
        double seconds = 0;
        auto initial = timed(seconds, [&] { return rank(q0, index); });
        outcome.ranking_seconds.push_back(seconds);
        outcome.rounds.push_back(score(initial, config.rate_threshold, source.word_id, relevant));

        if (config.strategy) {
            FeedbackSession session(word, std::move(q0), params, std::move(initial), config.shown_per_round);
            for (std::size_t r = 0; r < config.rounds; ++r) {
                const auto judgments =
                    feedback_oracle(session.latest_ranking(), config.shown_per_round, word, index, params.strategy);
                if (judgments.empty())
                    break;
                const auto& ranking = timed(seconds, [&] { return run_feedback_round(session, judgments, index); });
                outcome.ranking_seconds.push_back(seconds);
                outcome.rounds.push_back(score(ranking, config.rate_threshold, source.word_id, relevant));
                outcome.feedback_applied = true;
            }
        }
        outcome.precision = outcome.rounds.back().precision;
        outcome.recall = outcome.rounds.back().recall;
        report.queries.push_back(std::move(outcome));
    }

    double p = 0, r = 0;
    for (const auto& q : report.queries) {
        p += q.precision;
        r += q.recall;
    }
    report.avg_precision = p / static_cast<double>(report.queries.size());
    report.avg_recall = r / static_cast<double>(report.queries.size());
    return report;
}

EvalConfig config_for_method(const EvalConfig& base, const std::string& method)
{
    EvalConfig c = base;
    std::string_view name = method;
    c.subspace = name.starts_with("pca-");
    if (c.subspace)
        name.remove_prefix(4);
    if (name == "baseline")
        c.strategy = std::nullopt;
    else
        c.strategy = strategy_from_string(name);
    return c;
}

Comparison run_methods(const CorpusIndex& index, const EvalConfig& base, const std::vector<std::string>& methods,
                       const PcaOptions& pca_options)
{
    std::vector<EvalConfig> configs;
    bool any_subspace = false;
    for (const auto& m : methods) {
        configs.push_back(config_for_method(base, m));
        any_subspace = any_subspace || configs.back().subspace;
    }
    std::optional<CorpusIndex> fitted;
    if (any_subspace && !index.pca())
        fitted = fit_index_pca(index, pca_options);
    const CorpusIndex& with_model = fitted ? *fitted : index;

    Comparison out;
    for (const auto& c : configs) {
        auto report = run_experiment(c.subspace ? with_model : index, c);
        out.rows.push_back({c.method_name(), report.avg_precision, report.avg_recall,
                            report.mean_ranking_seconds() * 1e3});
        out.reports.push_back(std::move(report));
    }
    return out;
}

Comparison compare_strategies(const CorpusIndex& index, const EvalConfig& base, const PcaOptions& pca_options)
{
    return run_methods(index, base, kDefaultMethods, pca_options);
}

std::string report_to_json(const EvalReport& report, bool include_timings)
{
    return report_json(report, include_timings).dump(2);
}

std::string comparison_to_json(const Comparison& comparison, bool include_timings)
{
    json rows = json::array();
    for (const auto& r : comparison.rows) {
        json row = {{"method", r.method}, {"precision", r.precision}, {"recall", r.recall}};
        if (include_timings)
            row["mean_ranking_ms"] = r.mean_ranking_ms;
        rows.push_back(std::move(row));
    }
    json reports = json::array();
    for (const auto& rep : comparison.reports)
        reports.push_back(report_json(rep, include_timings));
    json out = {
        {"format", "wordspot-eval-comparison"},
        {"version", kReportVersion},
        {"rows", rows},
        {"reports", reports},
    };
    return out.dump(2);
}

std::string comparison_table(const Comparison& comparison)
{
    std::ostringstream out;
    out << std::left << std::setw(20) << "Method" << std::right << std::setw(12) << "Precision" << std::setw(12)
        << "Recall" << '\n';
    out << std::fixed << std::setprecision(2);
    for (const auto& r : comparison.rows)
        out << std::left << std::setw(20) << r.method << std::right << std::setw(11) << r.precision * 100 << '%'
            << std::setw(11) << r.recall * 100 << "%\n";
    return out.str();
}

} // namespace wordspot
