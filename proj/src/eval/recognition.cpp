#include "deid/eval/recognition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include "deid/error.hpp"

namespace deid::eval {

namespace {

void validate_inputs(std::span<const EmbeddingRecord> queries, std::span<const EmbeddingRecord> references) {
    if (references.empty()) throw ValidationError("reference set is empty");
    const std::size_t dim = references.front().vector.size();
    const std::string& recognizer = references.front().recognizer;
    auto check = [&](const EmbeddingRecord& r, const char* role) {
        if (r.vector.size() != dim)
            throw ValidationError(std::string(role) + " '" + r.image_ref + "' has dimension " +
                                  std::to_string(r.vector.size()) + ", expected " + std::to_string(dim));
        if (r.recognizer != recognizer)
            throw ValidationError(std::string(role) + " '" + r.image_ref + "' comes from recognizer '" + r.recognizer +
                                  "', expected '" + recognizer + "'");
        for (double v : r.vector)
            if (!std::isfinite(v)) throw ValidationError(std::string(role) + " '" + r.image_ref + "' is not finite");
    };
    for (const auto& r : references) check(r, "reference");
    for (const auto& q : queries) check(q, "query");
}

}  // namespace

DistanceMetric parse_metric(const std::string& name) {
    if (name == "euclidean") return DistanceMetric::euclidean;
    if (name == "cosine") return DistanceMetric::cosine;
    throw ValidationError("unknown distance metric '" + name + "'");
}

double embedding_distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric) {
    if (metric == DistanceMetric::euclidean) {
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
        }
        return std::sqrt(sum);
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<int> query_ranks(std::span<const EmbeddingRecord> queries, std::span<const EmbeddingRecord> references,
                             DistanceMetric metric) {
    validate_inputs(queries, references);
    std::vector<int> ranks;
    ranks.reserve(queries.size());
    std::vector<double> dist(references.size());
    for (const auto& q : queries) {
        std::size_t best = references.size();
        for (std::size_t r = 0; r < references.size(); ++r) {
            dist[r] = embedding_distance(q.vector, references[r].vector, metric);
            if (references[r].identity == q.identity && (best == references.size() || dist[r] < dist[best])) best = r;
        }
        if (best == references.size()) {
            ranks.push_back(kNoRank);
            continue;
        }
        // Position of `best` under the (distance, index) order.
        int ahead = 0;
        for (std::size_t r = 0; r < references.size(); ++r)
            if (dist[r] < dist[best] || (dist[r] == dist[best] && r < best)) ++ahead;
        ranks.push_back(ahead + 1);
    }
    return ranks;
}

double rank_k_accuracy(std::span<const EmbeddingRecord> queries, std::span<const EmbeddingRecord> references, int k,
                       DistanceMetric metric, int failed_queries) {
    if (k < 1) throw ValidationError("K must be >= 1");
    if (static_cast<std::size_t>(k) > references.size())
        throw ValidationError("K=" + std::to_string(k) + " exceeds reference count " + std::to_string(references.size()));
    const auto ranks = query_ranks(queries, references, metric);
    const std::size_t total = ranks.size() + static_cast<std::size_t>(std::max(failed_queries, 0));
    if (total == 0) return 0.0;
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [&](int r) { return r != kNoRank && r <= k; });
    return static_cast<double>(hits) / static_cast<double>(total);
}

RankingStats ranking_stats(std::vector<int> ranks) {
    RankingStats s;
    s.ranks = std::move(ranks);
    if (s.ranks.empty()) return s;
    std::vector<int> sorted = s.ranks;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    // Integer moments keep the variance an exact fraction until one final
    // division, so the result does not depend on summation order.
    std::int64_t sum = 0, sumsq = 0;
    for (int r : sorted) sum += r, sumsq += static_cast<std::int64_t>(r) * r;
    const auto nn = static_cast<std::int64_t>(n);
    s.mean = static_cast<double>(sum) / static_cast<double>(nn);
    s.sd = std::sqrt(static_cast<double>(nn * sumsq - sum * sum) / static_cast<double>(nn * nn));
    return s;
}

RankingStats identity_ranking(std::span<const EmbeddingRecord> queries, std::span<const EmbeddingRecord> references,
                              DistanceMetric metric) {
    std::vector<int> ranks = query_ranks(queries, references, metric);
    std::set<std::string> missing;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (ranks[i] == kNoRank) missing.insert(queries[i].identity);
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw ValidationError("identities without reference images: " + list);
    }
    return ranking_stats(std::move(ranks));
}

RecognitionResult evaluate_recognition(std::span<const EmbeddingRecord> queries,
                                       std::span<const EmbeddingRecord> references, const std::vector<int>& ks,
                                       DistanceMetric metric, int failed_queries) {
    RecognitionResult out;
    out.recognizer = references.empty() ? std::string{} : references.front().recognizer;
    out.queries = static_cast<int>(queries.size()) + failed_queries;
    out.failed_queries = failed_queries;
    const auto ranks = query_ranks(queries, references, metric);
    const double total = static_cast<double>(out.queries);
    for (int k : ks) {
        if (k < 1 || static_cast<std::size_t>(k) > references.size()) continue;
        const auto hits = std::count_if(ranks.begin(), ranks.end(), [&](int r) { return r != kNoRank && r <= k; });
        out.accuracy[k] = total > 0 ? static_cast<double>(hits) / total : 0.0;
    }
    std::vector<int> ranked;
    for (int r : ranks)
        if (r != kNoRank) ranked.push_back(r);
    out.ranking = ranking_stats(std::move(ranked));
    return out;
}

}  // namespace deid::eval
