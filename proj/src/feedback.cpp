#include "wordspot/feedback.hpp"

#include "wordspot/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace wordspot {

using nlohmann::json;

namespace {

constexpr int kSessionVersion = 1;

// (weight / |set|) * sum(set), or nullopt for an empty set.
std::optional<std::vector<double>> centroid_term(const VectorSet& set, double weight, std::size_t dim)
{
    if (set.empty())
        return std::nullopt;
    std::vector<double> sum(dim, 0.0);
    for (const auto& v : set) {
        if (v.size() != dim)
            throw DimensionError("feedback vector has length " + std::to_string(v.size()) + ", query has " +
                                 std::to_string(dim));
        for (std::size_t k = 0; k < dim; ++k)
            sum[k] += v[k];
    }
    const double scale = weight / static_cast<double>(set.size());
    for (auto& s : sum)
        s *= scale;
    return sum;
}

void check_weights(double alpha, double other)
{
    if (!std::isfinite(alpha) || !std::isfinite(other) || alpha < 0 || other < 0)
        throw ParameterError("Rocchio weights must be finite and non-negative");
}

QueryVector combine(const QueryVector& q0, const std::optional<std::vector<double>>& pos,
                    const std::optional<std::vector<double>>& neg, double alpha)
{
    QueryVector out{std::vector<double>(q0.values.size()), q0.space};
    for (std::size_t k = 0; k < q0.values.size(); ++k) {
        const double anchored = alpha * q0.values[k];
        if (pos && neg)
            out.values[k] = anchored + ((*pos)[k] - (*neg)[k]);
        else if (pos)
            out.values[k] = anchored + (*pos)[k];
        else
            out.values[k] = anchored - (*neg)[k];
    }
    return out;
}

json ranking_to_json(const RankedList& list, std::size_t top)
{
    json results = json::array();
    for (std::size_t i = 0; i < std::min(top, list.results.size()); ++i) {
        const auto& r = list.results[i];
        results.push_back({{"word_id", r.word_id}, {"distance", r.distance}, {"rate", r.rate}});
    }
    return {{"space", to_string(list.space)}, {"max_distance", list.max_distance}, {"results", results}};
}

RankedList ranking_from_json(const json& j)
{
    RankedList list;
    list.space = space_from_string(j.at("space").get<std::string>());
    list.max_distance = j.at("max_distance").get<double>();
    for (const auto& r : j.at("results"))
        list.results.push_back({r.at("word_id").get<std::uint64_t>(), r.at("distance").get<double>(),
                                r.at("rate").get<double>()});
    return list;
}

json query_to_json(const QueryVector& q)
{
    return {{"space", to_string(q.space)}, {"values", q.values}};
}

QueryVector query_from_json(const json& j)
{
    return {j.at("values").get<std::vector<double>>(), space_from_string(j.at("space").get<std::string>())};
}

} // namespace

std::string_view to_string(Strategy strategy)
{
    switch (strategy) {
    case Strategy::PositiveOnly:
        return "positive";
    case Strategy::NegativeOnly:
        return "negative";
    case Strategy::Combined:
        return "combined";
    }
    return "positive";
}

Strategy strategy_from_string(std::string_view name)
{
    if (name == "positive")
        return Strategy::PositiveOnly;
    if (name == "negative")
        return Strategy::NegativeOnly;
    if (name == "combined")
        return Strategy::Combined;
    throw ParameterError("unknown feedback strategy '" + std::string(name) + "'");
}

void RocchioParams::validate() const
{
    for (double w : {alpha, beta, gamma})
        if (!std::isfinite(w) || w < 0)
            throw ParameterError("Rocchio weights must be finite and non-negative");
    if (enforce_gamma_below_beta && !(gamma < beta))
        throw ParameterError("gamma must be smaller than beta (disable the guard to override)");
}

QueryVector rocchio_positive(const QueryVector& q0, const VectorSet& relevant, double alpha, double beta)
{
    check_weights(alpha, beta);
    if (relevant.empty())
        throw EmptyFeedbackError("positive feedback needs at least one relevant example");
    return combine(q0, centroid_term(relevant, beta, q0.values.size()), std::nullopt, alpha);
}

QueryVector rocchio_negative(const QueryVector& q0, const VectorSet& nonrelevant, double alpha, double gamma)
{
    check_weights(alpha, gamma);
    if (nonrelevant.empty())
        throw EmptyFeedbackError("negative feedback needs at least one non-relevant example");
    return combine(q0, std::nullopt, centroid_term(nonrelevant, gamma, q0.values.size()), alpha);
}

QueryVector rocchio_combined(const QueryVector& q0, const VectorSet& relevant, const VectorSet& nonrelevant,
                             const RocchioParams& params)
{
    check_weights(params.alpha, params.beta);
    check_weights(params.alpha, params.gamma);
    if (relevant.empty() && nonrelevant.empty())
        throw EmptyFeedbackError("combined feedback needs at least one judged example");
    const auto dim = q0.values.size();
    return combine(q0, centroid_term(relevant, params.beta, dim), centroid_term(nonrelevant, params.gamma, dim),
                   params.alpha);
}

QueryVector rocchio_update(const QueryVector& q0, const VectorSet& relevant, const VectorSet& nonrelevant,
                           const RocchioParams& params)
{
    switch (params.strategy) {
    case Strategy::PositiveOnly:
        return rocchio_positive(q0, relevant, params.alpha, params.beta);
    case Strategy::NegativeOnly:
        return rocchio_negative(q0, nonrelevant, params.alpha, params.gamma);
    case Strategy::Combined:
        return rocchio_combined(q0, relevant, nonrelevant, params);
    }
    throw ParameterError("unknown strategy");
}

FeedbackSession::FeedbackSession(std::string id, QueryVector q0, RocchioParams params, RankedList initial,
                                 std::size_t shown_per_round)
    : id_(std::move(id)), q0_(std::move(q0)), current_(q0_), params_(params), initial_(std::move(initial)),
      shown_(shown_per_round)
{
    params_.validate();
    if (shown_ == 0)
        throw ParameterError("sessions must show at least one result per round");
    if (initial_.space != q0_.space)
        throw SpaceError("initial ranking and query are in different spaces");
}

FeedbackSession FeedbackSession::start(std::string id, QueryVector q0, const CorpusIndex& index,
                                       RocchioParams params, std::size_t shown_per_round)
{
    auto initial = rank(q0, index);
    return FeedbackSession(std::move(id), std::move(q0), params, std::move(initial), shown_per_round);
}

void FeedbackSession::set_params(const RocchioParams& params)
{
    params.validate();
    params_ = params;
}

std::vector<std::uint64_t> FeedbackSession::shown() const
{
    const auto& results = latest_ranking().results;
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < std::min(shown_, results.size()); ++i)
        ids.push_back(results[i].word_id);
    return ids;
}

RankedList run_feedback_round(FeedbackSession& session, std::span<const Judgment> judgments,
                              const CorpusIndex& index)
{
    if (judgments.empty())
        throw EmptyFeedbackError("a feedback round needs at least one judgment");

    const auto shown = session.shown();
    std::map<std::uint64_t, bool> this_round;
    for (const auto& j : judgments) {
        if (std::find(shown.begin(), shown.end(), j.word_id) == shown.end())
            throw JudgmentError("word " + std::to_string(j.word_id) + " was not shown in the previous round");
        if (!index.position_of(j.word_id))
            throw JudgmentError("word " + std::to_string(j.word_id) + " is not in the index");
        const auto [it, inserted] = this_round.emplace(j.word_id, j.relevant);
        if (!inserted && it->second != j.relevant)
            throw JudgmentError("word " + std::to_string(j.word_id) + " judged both ways in one round");
    }

    const auto strategy = session.params().strategy;
    const bool any_relevant = std::any_of(this_round.begin(), this_round.end(), [](auto& p) { return p.second; });
    const bool any_nonrelevant = std::any_of(this_round.begin(), this_round.end(), [](auto& p) { return !p.second; });
    if (strategy == Strategy::PositiveOnly && !any_relevant)
        throw EmptyFeedbackError("positive-only feedback needs a relevant judgment");
    if (strategy == Strategy::NegativeOnly && !any_nonrelevant)
        throw EmptyFeedbackError("negative-only feedback needs a non-relevant judgment");

    std::map<std::uint64_t, bool> cumulative;
    for (const auto& round : session.rounds())
        for (const auto& j : round.judgments)
            cumulative[j.word_id] = j.relevant;
    for (const auto& [id, relevant] : this_round)
        cumulative[id] = relevant;

    const Space space = session.space();
    VectorSet relevant, nonrelevant;
    std::vector<std::size_t> relevant_positions;
    for (const auto& [id, is_relevant] : cumulative) {
        const auto pos = *index.position_of(id);
        const auto v = stored_vector(index, pos, space);
        if (is_relevant) {
            relevant.emplace_back(v.begin(), v.end());
            relevant_positions.push_back(pos);
        } else {
            nonrelevant.emplace_back(v.begin(), v.end());
        }
    }

    auto updated = rocchio_update(session.original_query(), relevant, nonrelevant, session.params());

    std::optional<RankedList> ranking;
    if (space == Space::Subspace && session.refit_on_positives > 0 && session.source_descriptor &&
        relevant_positions.size() >= std::max<std::size_t>(2, session.refit_on_positives)) {
        // Experimental: a basis fitted to the positive examples only.
        RowMatrix positives(static_cast<Eigen::Index>(relevant_positions.size()),
                            static_cast<Eigen::Index>(kDescriptorSize));
        for (std::size_t r = 0; r < relevant_positions.size(); ++r) {
            const auto v = stored_vector(index, relevant_positions[r], Space::Original);
            for (std::size_t k = 0; k < kDescriptorSize; ++k)
                positives(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v[k];
        }
        try {
            const auto model = fit_pca(positives, PcaOptions{0.95, std::nullopt, false});
            VectorSet rel_orig, nonrel_orig;
            for (const auto& [id, is_relevant] : cumulative) {
                const auto v = stored_vector(index, *index.position_of(id), Space::Original);
                (is_relevant ? rel_orig : nonrel_orig).emplace_back(v.begin(), v.end());
            }
            const QueryVector q0_orig{{session.source_descriptor->begin(), session.source_descriptor->end()},
                                      Space::Original};
            const auto q_orig = rocchio_update(q0_orig, rel_orig, nonrel_orig, session.params());
            ranking = rank_rows(project(model, q_orig.values), index.word_ids(),
                                project_rows(model, index.descriptors()), Metric::L1, Space::Subspace);
        } catch (const DegenerateSpectrumError&) {
            // identical positives: no subspace to fit, fall through
        }
    }
    if (!ranking)
        ranking = rank(updated, index);

    std::vector<Judgment> recorded;
    for (const auto& [id, relevant_flag] : this_round)
        recorded.push_back({id, relevant_flag});
    session.current_ = std::move(updated);
    session.rounds_.push_back({std::move(recorded), *ranking});
    return std::move(*ranking);
}

std::string session_to_json(const FeedbackSession& session, std::string_view index_path)
{
    const auto& p = session.params();
    json rounds = json::array();
    for (const auto& round : session.rounds()) {
        json judged = json::array();
        for (const auto& j : round.judgments)
            judged.push_back({{"word_id", j.word_id}, {"relevant", j.relevant}});
        rounds.push_back({{"judgments", judged}, {"ranking", ranking_to_json(round.ranking, session.shown_per_round())}});
    }
    json doc = {
        {"format", "wordspot-session"},
        {"version", kSessionVersion},
        {"id", session.id()},
        {"index", std::string(index_path)},
        {"shown_per_round", session.shown_per_round()},
        {"params",
         {{"alpha", p.alpha},
          {"beta", p.beta},
          {"gamma", p.gamma},
          {"strategy", to_string(p.strategy)},
          {"enforce_gamma_below_beta", p.enforce_gamma_below_beta}}},
        {"q0", query_to_json(session.original_query())},
        {"q_current", query_to_json(session.current_query())},
        {"initial_ranking", ranking_to_json(session.initial_ranking(), session.shown_per_round())},
        {"rounds", rounds},
        {"refit_on_positives", session.refit_on_positives},
    };
    if (session.source_descriptor)
        doc["source_descriptor"] = *session.source_descriptor;
    return doc.dump(2);
}

std::pair<FeedbackSession, std::string> session_from_json(std::string_view document)
{
    try {
        const auto doc = json::parse(document);
        if (doc.at("format").get<std::string>() != "wordspot-session")
            throw SessionFormatError("not a session document");
        if (doc.at("version").get<int>() != kSessionVersion)
            throw SessionFormatError("unsupported session version");

        const auto& pj = doc.at("params");
        RocchioParams params;
        params.alpha = pj.at("alpha").get<double>();
        params.beta = pj.at("beta").get<double>();
        params.gamma = pj.at("gamma").get<double>();
        params.strategy = strategy_from_string(pj.at("strategy").get<std::string>());
        params.enforce_gamma_below_beta = pj.at("enforce_gamma_below_beta").get<bool>();

        FeedbackSession session(doc.at("id").get<std::string>(), query_from_json(doc.at("q0")), params,
                                ranking_from_json(doc.at("initial_ranking")),
                                doc.at("shown_per_round").get<std::size_t>());
        session.current_ = query_from_json(doc.at("q_current"));
        for (const auto& r : doc.at("rounds")) {
            FeedbackRound round;
            for (const auto& j : r.at("judgments"))
                round.judgments.push_back({j.at("word_id").get<std::uint64_t>(), j.at("relevant").get<bool>()});
            round.ranking = ranking_from_json(r.at("ranking"));
            session.rounds_.push_back(std::move(round));
        }
        session.refit_on_positives = doc.value("refit_on_positives", std::size_t{0});
        if (doc.contains("source_descriptor"))
            session.source_descriptor = doc.at("source_descriptor").get<Descriptor>();
        return {std::move(session), doc.at("index").get<std::string>()};
    } catch (const json::exception& e) {
        throw SessionFormatError(std::string("malformed session document: ") + e.what());
    }
}

} // namespace wordspot
