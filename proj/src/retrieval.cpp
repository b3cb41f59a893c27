#include "wordspot/retrieval.hpp"

#include "wordspot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace wordspot {

namespace {

// Positions sorted by (distance, id): a counting pass over distance buckets
// (bucket index is monotone in the distance), then a small sort per bucket.
std::vector<std::uint32_t> order_by_distance(const std::vector<double>& distances, double max_distance,
                                             std::span<const std::uint64_t> ids)
{
    const std::size_t n = distances.size();
    const std::size_t buckets = std::max<std::size_t>(1, n);
    const double scale = max_distance > 0 ? static_cast<double>(buckets) / max_distance : 0.0;
    auto bucket_of = [&](double d) { return std::min(buckets - 1, static_cast<std::size_t>(d * scale)); };

    std::vector<std::uint32_t> start(buckets + 1, 0);
    for (double d : distances)
        ++start[bucket_of(d) + 1];
    for (std::size_t b = 0; b < buckets; ++b)
        start[b + 1] += start[b];
    std::vector<std::uint32_t> order(n);
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
        order[fill[bucket_of(distances[i])]++] = static_cast<std::uint32_t>(i);

    auto before = [&](std::uint32_t a, std::uint32_t b) {
        return distances[a] < distances[b] || (distances[a] == distances[b] && ids[a] < ids[b]);
    };
    for (std::size_t b = 0; b < buckets; ++b)
        if (start[b + 1] - start[b] > 1)
            std::sort(order.begin() + start[b], order.begin() + start[b + 1], before);
    return order;
}

} // namespace

std::string_view to_string(Space space)
{
    return space == Space::Original ? "original" : "subspace";
}

Space space_from_string(std::string_view name)
{
    if (name == "original")
        return Space::Original;
    if (name == "subspace")
        return Space::Subspace;
    throw SpaceError("unknown space '" + std::string(name) + "'");
}

double minkowski_distance(std::span<const double> q, std::span<const double> w)
{
    if (q.size() != w.size())
        throw DimensionError("distance between vectors of length " + std::to_string(q.size()) + " and " +
                             std::to_string(w.size()));
    double sum = 0;
    for (std::size_t k = 0; k < q.size(); ++k)
        sum += std::abs(q[k] - w[k]);
    return sum;
}

double similarity_rate(double md, double max_md)
{
    if (!(md >= 0) || !(max_md >= 0))
        throw RangeError("distances must be non-negative");
    if (md > max_md)
        throw RangeError("distance exceeds the maximum distance");
    if (max_md == 0)
        return 100.0;
    return 100.0 * (1.0 - md / max_md);
}

Metric metric_for(Space space, const CorpusIndex& index)
{
    if (space == Space::Original)
        return Metric::L1;
    if (!index.pca())
        throw SpaceError("subspace ranking needs a PCA model on the index");
    return index.pca()->whitened ? Metric::SquaredEuclidean : Metric::L1;
}

RankedList rank_rows(std::span<const double> query, std::span<const std::uint64_t> ids,
                     std::span<const double> rows, Metric metric, Space space)
{
    if (ids.empty())
        throw EmptyIndexError("cannot rank against an empty index");
    const std::size_t dim = query.size();
    if (dim == 0 || rows.size() != ids.size() * dim)
        throw DimensionError("query length " + std::to_string(dim) + " does not match stored rows");

    std::vector<double> distances(ids.size());
    const double* q = query.data();
    double max_distance = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double* w = rows.data() + i * dim;
        double d = 0;
        if (metric == Metric::L1) {
            for (std::size_t k = 0; k < dim; ++k)
                d += std::abs(q[k] - w[k]);
        } else {
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = q[k] - w[k];
                d += diff * diff;
            }
        }
        distances[i] = d;
        max_distance = std::max(max_distance, d);
    }

    RankedList list;
    list.space = space;
    list.max_distance = max_distance;
    list.results.reserve(ids.size());
    for (auto i : order_by_distance(distances, max_distance, ids)) {
        const double d = distances[i];
        list.results.push_back({ids[i], d, max_distance == 0 ? 100.0 : 100.0 * (1.0 - d / max_distance)});
    }
    return list;
}

RankedList rank(const QueryVector& query, const CorpusIndex& index)
{
    if (index.empty())
        throw EmptyIndexError("cannot rank against an empty index");
    const Metric metric = metric_for(query.space, index);
    if (query.space == Space::Original) {
        if (query.values.size() != kDescriptorSize)
            throw DimensionError("original-space queries have 93 components");
        return rank_rows(query.values, index.word_ids(), index.descriptors(), metric, Space::Original);
    }
    if (query.values.size() != index.pca()->dimension())
        throw DimensionError("subspace query has " + std::to_string(query.values.size()) +
                             " components, model retains " + std::to_string(index.pca()->dimension()));
    return rank_rows(query.values, index.word_ids(), index.projected(), metric, Space::Subspace);
}

QueryVector make_query(const Descriptor& descriptor, Space space, const CorpusIndex& index)
{
    if (space == Space::Original)
        return {{descriptor.begin(), descriptor.end()}, Space::Original};
    if (!index.pca())
        throw SpaceError("subspace query needs a PCA model on the index");
    return {project(*index.pca(), descriptor), Space::Subspace};
}

std::span<const double> stored_vector(const CorpusIndex& index, std::size_t position, Space space)
{
    if (space == Space::Original)
        return index.descriptors().subspan(position * kDescriptorSize, kDescriptorSize);
    if (!index.pca())
        throw SpaceError("index has no PCA model");
    return index.projected_row(position);
}

} // namespace wordspot
