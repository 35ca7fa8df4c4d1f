#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "deid/core/image.hpp"
#include "deid/eval/adapters.hpp"
#include "deid/eval/recognition.hpp"
#include "deid/privatize/blur.hpp"

namespace deid::eval {

/// A query face still inside its frame, so blurring sees the same box the
/// privatizer would.
struct SweepQuery {
    std::string identity;
    std::string image_ref;
    Image frame;
    BoxGeom box;
};

struct SweepRow {
    privatize::BlurScale scale;
    std::map<int, double> accuracy;  // K -> fraction
    int queries = 0;
    int failed = 0;
    std::string error;  // set when the whole scale could not be evaluated
};

/// Embeds the unblurred query faces (the "original" condition).
std::vector<EmbeddingRecord> embed_queries(std::span<const SweepQuery> queries, Embedder& embedder, int* failed = nullptr);

/// For every scale: blur each query box, re-embed the face crop, and score
/// accuracy at each K against `references`. Failed embeddings count as
/// misses. Rows come back strongest blur first.
std::vector<SweepRow> blur_sweep(std::span<const SweepQuery> queries, std::span<const privatize::BlurScale> scales,
                                 Embedder& embedder, std::span<const EmbeddingRecord> references,
                                 const std::vector<int>& ks = {1}, DistanceMetric metric = DistanceMetric::euclidean);

}  // namespace deid::eval
