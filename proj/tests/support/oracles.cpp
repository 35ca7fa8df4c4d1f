#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace deid::testing {

namespace {

double centre_gap(const BoxGeom& a, const BoxGeom& b) {
    const double ax = a.x + a.w / 2.0, ay = a.y + a.h / 2.0;
    const double bx = b.x + b.w / 2.0, by = b.y + b.h / 2.0;
    return std::sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by));
}

double diag(const BoxGeom& b) { return std::sqrt(double(b.w) * b.w + double(b.h) * b.h); }

}  // namespace

bool within_gate(const BoxGeom& a, const BoxGeom& b, double gate_fraction) {
    return centre_gap(a, b) <= gate_fraction * (diag(a) + diag(b)) / 2.0;
}

std::vector<std::vector<Pairing>> all_matchings(std::span<const FaceObservation> earlier,
                                                std::span<const FaceObservation> later, double gate_fraction) {
    std::vector<std::vector<Pairing>> out;
    std::vector<Pairing> current;
    std::vector<bool> used(later.size(), false);
    auto recurse = [&](auto&& self, std::size_t i) -> void {
        if (i == earlier.size()) {
            out.push_back(current);
            return;
        }
        self(self, i + 1);
        for (std::size_t j = 0; j < later.size(); ++j) {
            if (used[j] || !within_gate(earlier[i].box, later[j].box, gate_fraction)) continue;
            used[j] = true;
            current.push_back({i, j});
            self(self, i + 1);
            current.pop_back();
            used[j] = false;
        }
    };
    recurse(recurse, 0);
    return out;
}

std::vector<Pairing> lexicographic_matching(std::span<const FaceObservation> earlier,
                                            std::span<const FaceObservation> later, double gate_fraction) {
    using Key = std::tuple<double, std::size_t, std::size_t>;
    std::vector<Key> best_keys;
    std::vector<Pairing> best;
    bool have = false;
    for (const auto& m : all_matchings(earlier, later, gate_fraction)) {
        std::vector<bool> ue(earlier.size()), ul(later.size());
        for (const auto& p : m) ue[p.earlier] = ul[p.later] = true;
        bool maximal = true;
        for (std::size_t i = 0; i < earlier.size() && maximal; ++i)
            for (std::size_t j = 0; j < later.size(); ++j)
                if (!ue[i] && !ul[j] && within_gate(earlier[i].box, later[j].box, gate_fraction)) maximal = false;
        if (!maximal) continue;
        std::vector<Key> keys;
        for (const auto& p : m) keys.emplace_back(centre_gap(earlier[p.earlier].box, later[p.later].box), p.earlier, p.later);
        std::sort(keys.begin(), keys.end());
        if (!have || keys < best_keys) {
            best_keys = keys;
            best = m;
            have = true;
        }
    }
    std::sort(best.begin(), best.end(), [](const Pairing& a, const Pairing& b) { return a.earlier < b.earlier; });
    return best;
}

AssignmentValue assignment_value(std::span<const FaceObservation> earlier, std::span<const FaceObservation> later,
                                 std::span<const Pairing> pairs) {
    AssignmentValue v;
    v.pairs = pairs.size();
    for (const auto& p : pairs) v.total += centre_gap(earlier[p.earlier].box, later[p.later].box);
    return v;
}

AssignmentValue min_total_assignment(std::span<const FaceObservation> earlier,
                                     std::span<const FaceObservation> later, double gate_fraction) {
    AssignmentValue best;
    bool have = false;
    for (const auto& m : all_matchings(earlier, later, gate_fraction)) {
        const auto v = assignment_value(earlier, later, m);
        if (!have || v.pairs > best.pairs || (v.pairs == best.pairs && v.total < best.total)) {
            best = v;
            have = true;
        }
    }
    return best;
}

std::vector<std::vector<std::array<int, 3>>> union_find_chains(std::span<const FaceObservation> obs, int gap_limit,
                                                              double gate_fraction) {
    std::vector<std::size_t> parent(obs.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t a = 0; a < obs.size(); ++a)
        for (std::size_t b = 0; b < obs.size(); ++b) {
            const int df = obs[b].frame - obs[a].frame;
            if (df < 1 || df > gap_limit) continue;
            if (within_gate(obs[a].box, obs[b].box, gate_fraction)) parent[find(a)] = find(b);
        }
    std::map<std::size_t, std::vector<std::array<int, 3>>> groups;
    for (std::size_t i = 0; i < obs.size(); ++i) groups[find(i)].push_back({obs[i].frame, obs[i].box.x, obs[i].box.y});
    std::vector<std::vector<std::array<int, 3>>> out;
    for (auto& [root, g] : groups) {
        std::sort(g.begin(), g.end());
        out.push_back(std::move(g));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> oracle_ranks(std::span<const eval::EmbeddingRecord> queries,
                              std::span<const eval::EmbeddingRecord> references, eval::DistanceMetric metric) {
    auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
        if (metric == eval::DistanceMetric::euclidean) {
            double s = 0;
            for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
            return std::sqrt(s);
        }
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    };
    std::vector<int> ranks;
    for (const auto& q : queries) {
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t r = 0; r < references.size(); ++r) order.emplace_back(dist(q.vector, references[r].vector), r);
        std::sort(order.begin(), order.end());
        int rank = 0;
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            if (references[order[pos].second].identity == q.identity) {
                rank = static_cast<int>(pos) + 1;
                break;
            }
        ranks.push_back(rank);
    }
    return ranks;
}

double oracle_accuracy(std::span<const int> ranks, int k, int failed) {
    int hits = 0;
    for (int r : ranks)
        if (r >= 1 && r <= k) ++hits;
    const int total = static_cast<int>(ranks.size()) + failed;
    return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

OracleStats oracle_stats(std::vector<int> ranks) {
    std::sort(ranks.begin(), ranks.end());
    const std::size_t n = ranks.size();
    OracleStats s{};
    if (n == 0) return s;
    s.median = n % 2 ? ranks[n / 2] : (ranks[n / 2 - 1] + ranks[n / 2]) / 2.0;
    long long total = 0;
    for (int r : ranks) total += r;
    s.mean = static_cast<double>(total) / static_cast<double>(n);
    // two-pass, exact: sum of (n*r - total)^2 over n^3
    const long long ln = static_cast<long long>(n);
    long long dev = 0;
    for (int r : ranks) dev += (ln * r - total) * (ln * r - total);
    s.sd = std::sqrt(static_cast<double>(dev) / static_cast<double>(ln * ln * ln));
    return s;
}

double oracle_landmark_distance(const eval::LandmarkSet& o, const eval::LandmarkSet& p, std::size_t first,
                                std::size_t last) {
    double sum = 0;
    for (std::size_t i = first; i <= last; ++i) {
        const double dx = (o.points[i].x - p.points[i].x) / o.box.w;
        const double dy = (o.points[i].y - p.points[i].y) / o.box.h;
        sum += std::sqrt(dx * dx + dy * dy);
    }
    return sum / static_cast<double>(last - first + 1);
}

Image oracle_box_filter(const Image& image, const BoxGeom& box, int k) {
    Image out = image;
    const int half = k / 2;
    for (int y = box.y; y < box.bottom(); ++y)
        for (int x = box.x; x < box.right(); ++x)
            for (int c = 0; c < image.channels; ++c) {
                long long sum = 0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) {
                        const int sx = std::clamp(x - half + dx, box.x, box.right() - 1);
                        const int sy = std::clamp(y - half + dy, box.y, box.bottom() - 1);
                        sum += image.at(sx, sy, c);
                    }
                const long long n = static_cast<long long>(k) * k;
                out.at(x, y, c) = static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
            }
    return out;
}

}  // namespace deid::testing
