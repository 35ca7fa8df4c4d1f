#include "deid/eval/expression.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <string>

#include "deid/error.hpp"

namespace deid::eval {

std::string_view to_string(Expression e) {
    switch (e) {
        case Expression::Angry: return "Angry";
        case Expression::Disgust: return "Disgust";
        case Expression::Fear: return "Fear";
        case Expression::Happy: return "Happy";
        case Expression::Sad: return "Sad";
        case Expression::Surprise: return "Surprise";
        case Expression::Neutral: return "Neutral";
    }
    return "?";
}

Expression parse_expression(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "anger") lower = "angry";
    for (Expression e : kAllExpressions) {
        std::string candidate(to_string(e));
        std::transform(candidate.begin(), candidate.end(), candidate.begin(), [](unsigned char c) { return std::tolower(c); });
        if (candidate == lower) return e;
    }
    throw ValidationError("unknown expression label '" + std::string(name) + "'");
}

std::vector<Expression> distribution_order(std::span<const ExpressionLabel> labels) {
    std::array<int, kExpressionCount> counts{};
    for (const auto& l : labels) ++counts[static_cast<std::size_t>(l.label)];
    std::vector<Expression> order(kAllExpressions.begin(), kAllExpressions.end());
    std::sort(order.begin(), order.end(), [&](Expression a, Expression b) {
        const int ca = counts[static_cast<std::size_t>(a)];
        const int cb = counts[static_cast<std::size_t>(b)];
        if (ca != cb) return ca > cb;
        return to_string(a) < to_string(b);
    });
    return order;
}

ExpressionResult expression_agreement(std::span<const ExpressionLabel> original,
                                      std::span<const ExpressionLabel> privatized) {
    std::map<int, Expression> orig;
    std::map<int, Expression> priv;
    for (const auto& l : original) orig[l.frame] = l.label;
    for (const auto& l : privatized) priv[l.frame] = l.label;

    ExpressionResult r;
    int diagonal = 0;
    for (const auto& [frame, o] : orig) {
        auto it = priv.find(frame);
        if (it == priv.end()) {
            ++r.skipped;
            continue;
        }
        ++r.compared;
        ++r.confusion[static_cast<std::size_t>(o)][static_cast<std::size_t>(it->second)];
        if (o == it->second) ++diagonal;
    }
    for (const auto& [frame, p] : priv)
        if (!orig.count(frame)) ++r.skipped;
    if (r.compared > 0) r.agreement_rate = 100.0 * diagonal / r.compared;
    r.original_order = distribution_order(original);
    r.privatized_order = distribution_order(privatized);
    return r;
}

}  // namespace deid::eval
