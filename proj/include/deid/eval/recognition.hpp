#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace deid::eval {

struct EmbeddingRecord {
    std::string identity;
    std::string image_ref;
    std::vector<double> vector;
    std::string recognizer;
};

enum class DistanceMetric { euclidean, cosine };

DistanceMetric parse_metric(const std::string& name);

double embedding_distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric);

/// Marker rank for a query whose identity has no reference image.
inline constexpr int kNoRank = 0;

/// 1-based position of the first reference image with the query's identity
/// when references are ordered by ascending distance (ties by reference
/// order). kNoRank if the identity is absent. Throws ValidationError on
/// empty references, dimension mismatch, non-finite values or mixed
/// recognizers.
std::vector<int> query_ranks(std::span<const EmbeddingRecord> queries, std::span<const EmbeddingRecord> references,
                             DistanceMetric metric = DistanceMetric::euclidean);

/// Fraction of queries whose identity is among the K nearest references.
/// `failed_queries` extra queries (e.g. faces that could not be re-embedded)
/// count as misses.
double rank_k_accuracy(std::span<const EmbeddingRecord> queries, std::span<const EmbeddingRecord> references, int k,
                       DistanceMetric metric = DistanceMetric::euclidean, int failed_queries = 0);

struct RankingStats {
    std::vector<int> ranks;
    double median = 0.0;
    double mean = 0.0;
    double sd = 0.0;  // population
};

/// Throws ValidationError listing identities that have no reference image.
RankingStats identity_ranking(std::span<const EmbeddingRecord> queries, std::span<const EmbeddingRecord> references,
                              DistanceMetric metric = DistanceMetric::euclidean);

RankingStats ranking_stats(std::vector<int> ranks);

inline const std::vector<int> kReportedKs{1, 2, 5, 10};

struct RecognitionResult {
    std::string recognizer;
    std::map<int, double> accuracy;  // K -> fraction
    RankingStats ranking;
    int queries = 0;
    int failed_queries = 0;
};

/// Accuracy at each K (skipping K larger than the reference count) plus
/// identity-ranking statistics over the successfully embedded queries.
RecognitionResult evaluate_recognition(std::span<const EmbeddingRecord> queries,
                                       std::span<const EmbeddingRecord> references, const std::vector<int>& ks = kReportedKs,
                                       DistanceMetric metric = DistanceMetric::euclidean, int failed_queries = 0);

}  // namespace deid::eval
