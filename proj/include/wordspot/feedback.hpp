#pragma once

#include "wordspot/corpus.hpp"
#include "wordspot/retrieval.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wordspot {

enum class Strategy : std::uint8_t
{
    PositiveOnly,
    NegativeOnly,
    Combined,
};

std::string_view to_string(Strategy strategy);
/// Accepts "positive", "negative", "combined". Throws ParameterError otherwise.
Strategy strategy_from_string(std::string_view name);

struct RocchioParams
{
    double alpha = 1.0;
    double beta = 0.82;
    double gamma = 0.25;
    Strategy strategy = Strategy::PositiveOnly;
    /// Rejects gamma >= beta unless switched off.
    bool enforce_gamma_below_beta = true;

    /// Throws ParameterError for negative or non-finite weights, or for
    /// gamma >= beta while the guard is on.
    void validate() const;

    bool operator==(const RocchioParams&) const = default;
};

struct Judgment
{
    std::uint64_t word_id = 0;
    bool relevant = false;

    bool operator==(const Judgment&) const = default;
};

using VectorSet = std::vector<std::vector<double>>;

/// q0 * alpha + beta * mean(relevant). Throws EmptyFeedbackError for an
/// empty set and DimensionError on mismatched lengths.
QueryVector rocchio_positive(const QueryVector& q0, const VectorSet& relevant, double alpha, double beta);

/// q0 * alpha - gamma * mean(nonrelevant).
QueryVector rocchio_negative(const QueryVector& q0, const VectorSet& nonrelevant, double alpha, double gamma);

/// q0 * alpha + beta * mean(relevant) - gamma * mean(nonrelevant); an empty
/// set drops its term. With one set empty the result is bit-identical to the
/// single-sided update. Throws EmptyFeedbackError when both sets are empty.
QueryVector rocchio_combined(const QueryVector& q0, const VectorSet& relevant, const VectorSet& nonrelevant,
                             const RocchioParams& params);

/// Dispatches on params.strategy; the unused set is ignored.
QueryVector rocchio_update(const QueryVector& q0, const VectorSet& relevant, const VectorSet& nonrelevant,
                           const RocchioParams& params);

struct FeedbackRound
{
    std::vector<Judgment> judgments;
    RankedList ranking;
};

/// Live query state for one user.
///
/// Every round recomputes the query from the original q0 and the union of
/// all judgments so far (a later judgment of the same word wins). Only words
/// shown in the previous round's top N may be judged.
class FeedbackSession
{
public:
    FeedbackSession(std::string id, QueryVector q0, RocchioParams params, RankedList initial,
                    std::size_t shown_per_round = 10);

    /// Ranks q0 against `index` and opens a session on that ranking.
    static FeedbackSession start(std::string id, QueryVector q0, const CorpusIndex& index,
                                 RocchioParams params = {}, std::size_t shown_per_round = 10);

    const std::string& id() const { return id_; }
    const QueryVector& original_query() const { return q0_; }
    const QueryVector& current_query() const { return current_; }
    Space space() const { return q0_.space; }
    const RocchioParams& params() const { return params_; }
    void set_params(const RocchioParams& params);
    std::size_t shown_per_round() const { return shown_; }

    const RankedList& initial_ranking() const { return initial_; }
    const std::vector<FeedbackRound>& rounds() const { return rounds_; }
    const RankedList& latest_ranking() const { return rounds_.empty() ? initial_ : rounds_.back().ranking; }
    std::size_t round_index() const { return rounds_.size(); }

    /// Word ids currently open for judgment (top N of the latest ranking).
    std::vector<std::uint64_t> shown() const;

    /// Original-space descriptor of the query word. When set together with
    /// refit_on_positives, subspace rounds with enough positive examples
    /// re-fit a PCA basis on those examples (experimental).
    std::optional<Descriptor> source_descriptor;
    std::size_t refit_on_positives = 0;

private:
    friend RankedList run_feedback_round(FeedbackSession&, std::span<const Judgment>, const CorpusIndex&);
    friend std::pair<FeedbackSession, std::string> session_from_json(std::string_view);

    std::string id_;
    QueryVector q0_;
    QueryVector current_;
    RocchioParams params_;
    RankedList initial_;
    std::vector<FeedbackRound> rounds_;
    std::size_t shown_;
};

/// Applies one round of judgments and returns the new ranking. The session
/// is left untouched when an error is thrown.
///
/// Throws EmptyFeedbackError when there are no judgments or none fit the
/// session strategy, JudgmentError for words outside the shown set.
RankedList run_feedback_round(FeedbackSession& session, std::span<const Judgment> judgments,
                              const CorpusIndex& index);

/// Versioned JSON session document. Rankings are stored truncated to the
/// shown top N, which is all a restored session needs to continue.
std::string session_to_json(const FeedbackSession& session, std::string_view index_path = {});
/// Returns the session and the index path recorded in the document.
std::pair<FeedbackSession, std::string> session_from_json(std::string_view document);

} // namespace wordspot
