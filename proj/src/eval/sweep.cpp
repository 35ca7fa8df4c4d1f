#include "deid/eval/sweep.hpp"

#include <algorithm>

namespace deid::eval {

namespace {

std::vector<EmbeddingRecord> embed_faces(std::span<const SweepQuery> queries, Embedder& embedder,
                                         const privatize::BlurSpec* blur, int& failed) {
    std::vector<EmbeddingRecord> out;
    failed = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        try {
            Image face = blur ? crop_image(privatize::blur_region(q.frame, q.box, *blur), q.box) : crop_image(q.frame, q.box);
            out.push_back({q.identity, q.image_ref, embedder.embed(face, static_cast<int>(i)), embedder.name()});
        } catch (const std::exception&) {
            ++failed;
        }
    }
    return out;
}

}  // namespace

std::vector<EmbeddingRecord> embed_queries(std::span<const SweepQuery> queries, Embedder& embedder, int* failed) {
    int f = 0;
    auto out = embed_faces(queries, embedder, nullptr, f);
    if (failed) *failed = f;
    return out;
}

std::vector<SweepRow> blur_sweep(std::span<const SweepQuery> queries, std::span<const privatize::BlurScale> scales,
                                 Embedder& embedder, std::span<const EmbeddingRecord> references,
                                 const std::vector<int>& ks, DistanceMetric metric) {
    std::vector<privatize::BlurScale> ordered(scales.begin(), scales.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.num * b.den > b.num * a.den; });
    std::vector<SweepRow> rows;
    for (const auto& scale : ordered) {
        SweepRow row;
        row.scale = scale;
        row.queries = static_cast<int>(queries.size());
        try {
            const privatize::BlurSpec spec{scale};
            spec.validate();
            auto embedded = embed_faces(queries, embedder, &spec, row.failed);
            auto result = evaluate_recognition(embedded, references, ks, metric, row.failed);
            row.accuracy = std::move(result.accuracy);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace deid::eval
