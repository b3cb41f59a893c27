#pragma once

#include "wordspot/corpus.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace wordspot {

enum class Space : std::uint8_t
{
    Original, ///< 93-dim descriptor space, L1 distance
    Subspace, ///< PCA coordinates of the index's model
};

std::string_view to_string(Space space);
Space space_from_string(std::string_view name);

/// Distance used for a scan over stored rows.
enum class Metric : std::uint8_t
{
    L1,
    SquaredEuclidean,
};

/// Query in either space. Components are not confined to [0, 1]; Rocchio
/// updates routinely leave the unit cube.
struct QueryVector
{
    std::vector<double> values;
    Space space = Space::Original;

    bool operator==(const QueryVector&) const = default;
};

struct RankedResult
{
    std::uint64_t word_id = 0;
    double distance = 0;
    double rate = 0;

    bool operator==(const RankedResult&) const = default;
};

/// All entries ordered by ascending distance, ties by ascending word id.
struct RankedList
{
    std::vector<RankedResult> results;
    double max_distance = 0;
    Space space = Space::Original;

    bool operator==(const RankedList&) const = default;
};

/// Sum of absolute component differences. Throws DimensionError on a length mismatch.
double minkowski_distance(std::span<const double> q, std::span<const double> w);

/// 100 * (1 - md / max_md), or 100 when max_md is zero.
/// Throws RangeError for negative inputs or md > max_md.
double similarity_rate(double md, double max_md);

/// Metric used for ranking in `space` against `index`: L1 in the original
/// space and for un-whitened subspaces, squared Euclidean for whitened subspaces.
Metric metric_for(Space space, const CorpusIndex& index);

/// Ranks every entry of `index` against `query`. Subspace queries must be
/// projected already and need a model on the index (SpaceError otherwise).
/// Throws EmptyIndexError for an empty index.
RankedList rank(const QueryVector& query, const CorpusIndex& index);

/// Ranks arbitrary row-major rows (one per id). Storage order does not
/// affect the result.
RankedList rank_rows(std::span<const double> query, std::span<const std::uint64_t> ids,
                     std::span<const double> rows, Metric metric, Space space);

/// Query vector for a raw descriptor, projected when `space` is Subspace.
QueryVector make_query(const Descriptor& descriptor, Space space, const CorpusIndex& index);

/// Stored coordinates of an indexed word in `space`.
std::span<const double> stored_vector(const CorpusIndex& index, std::size_t position, Space space);

} // namespace wordspot
