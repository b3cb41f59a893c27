#pragma once

#include "wordspot/corpus.hpp"
#include "wordspot/feedback.hpp"
#include "wordspot/retrieval.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace wordspot {

struct PrecisionRecall
{
    double precision = 0;
    double recall = 0;
};

/// P = |ret ∩ rel| / |ret| (0 for an empty retrieved set), R = |ret ∩ rel| / |rel|.
/// Throws NoGroundTruthError when `relevant` is empty.
PrecisionRecall precision_recall(const std::set<std::uint64_t>& retrieved, const std::set<std::uint64_t>& relevant);

/// Simulated user: judges each of the first `shown` results by exact label
/// match, keeping only the judgments the strategy can use.
/// Throws NoGroundTruthError for an unlabeled entry or an empty query label.
std::vector<Judgment> feedback_oracle(const RankedList& ranking, std::size_t shown, const std::string& query_label,
                                      const CorpusIndex& index, Strategy strategy);

struct EvalConfig
{
    std::size_t n_queries = 30;
    std::size_t shown_per_round = 10;
    std::size_t rounds = 1;
    double rate_threshold = 75.0;
    /// nullopt runs the plain ranking without feedback.
    std::optional<Strategy> strategy;
    RocchioParams params;
    bool subspace = false;
    std::uint64_t seed = 42;
    std::size_t min_word_length = 4;

    /// Throws ParameterError on an invalid configuration.
    void validate() const;
    /// "baseline", "positive", ... with a "pca-" prefix for subspace runs.
    std::string method_name() const;
};

struct RoundMetrics
{
    double precision = 0;
    double recall = 0;
    std::size_t retrieved = 0;
};

struct QueryOutcome
{
    std::string word;
    std::uint64_t source_word_id = 0;
    std::size_t relevant = 0;
    /// Round 0 is the initial ranking; the last element is the final one.
    std::vector<RoundMetrics> rounds;
    /// false when the oracle had nothing usable for the strategy.
    bool feedback_applied = false;
    double precision = 0;
    double recall = 0;
    /// Wall-clock seconds per ranking call; excluded from the JSON report.
    std::vector<double> ranking_seconds;
};

struct EvalReport
{
    EvalConfig config;
    std::vector<QueryOutcome> queries;
    double avg_precision = 0;
    double avg_recall = 0;

    double mean_ranking_seconds() const;
};

/// Query words: labels with at least min_word_length letters and two or
/// more occurrences, sorted.
std::vector<std::string> eligible_query_words(const CorpusIndex& index, std::size_t min_word_length = 4);

/// Batch search protocol: sample n_queries eligible words (seeded), use one
/// occurrence as q0, rank, run the oracle-driven feedback rounds, and score
/// the final ranking. The retrieved set is every entry whose rate reaches
/// the threshold; the query's own occurrence is left out of both sets.
/// Throws GenerationError when fewer than n_queries words are eligible.
EvalReport run_experiment(const CorpusIndex& index, const EvalConfig& config);

struct ComparisonRow
{
    std::string method;
    double precision = 0;
    double recall = 0;
    double mean_ranking_ms = 0;
};

struct Comparison
{
    std::vector<ComparisonRow> rows;
    std::vector<EvalReport> reports;
};

/// Method names as produced by EvalConfig::method_name(): "baseline",
/// "positive", "negative", "combined", each optionally prefixed "pca-".
inline const std::vector<std::string> kDefaultMethods = {"baseline", "positive", "negative", "combined",
                                                         "pca-baseline"};

/// Applies a method name to `base`. Throws ParameterError for unknown names.
EvalConfig config_for_method(const EvalConfig& base, const std::string& method);

/// Runs each method with the shared seed of `base`. Subspace methods use
/// the index's model, or one fitted with `pca_options` when it has none.
Comparison run_methods(const CorpusIndex& index, const EvalConfig& base, const std::vector<std::string>& methods,
                       const PcaOptions& pca_options = {});

/// run_methods over kDefaultMethods.
Comparison compare_strategies(const CorpusIndex& index, const EvalConfig& base,
                              const PcaOptions& pca_options = {});

/// Stable-schema JSON ("wordspot-eval-report", version 1). Timings are left
/// out unless requested so reports are reproducible byte for byte.
std::string report_to_json(const EvalReport& report, bool include_timings = false);
std::string comparison_to_json(const Comparison& comparison, bool include_timings = false);
/// Method / Precision / Recall table, percentages.
std::string comparison_table(const Comparison& comparison);

} // namespace wordspot
