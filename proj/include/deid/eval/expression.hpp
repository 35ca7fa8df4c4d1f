#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace deid::eval {

enum class Expression { Angry, Disgust, Fear, Happy, Sad, Surprise, Neutral };

inline constexpr std::size_t kExpressionCount = 7;
inline constexpr std::array<Expression, kExpressionCount> kAllExpressions{
    Expression::Angry, Expression::Disgust, Expression::Fear,   Expression::Happy,
    Expression::Sad,   Expression::Surprise, Expression::Neutral};

std::string_view to_string(Expression e);
/// Case-insensitive; also accepts the lowercase names some classifiers emit.
Expression parse_expression(std::string_view name);

struct ExpressionLabel {
    int frame = 0;
    Expression label = Expression::Neutral;
};

using ConfusionMatrix = std::array<std::array<int, kExpressionCount>, kExpressionCount>;

struct ExpressionResult {
    int compared = 0;  // frames labelled in both streams
    int skipped = 0;   // frames labelled in only one stream
    std::optional<double> agreement_rate;  // percent, empty when nothing compared
    ConfusionMatrix confusion{};           // [original][privatized]
    std::vector<Expression> original_order;
    std::vector<Expression> privatized_order;
};

/// Descending frequency, ties alphabetical by name.
std::vector<Expression> distribution_order(std::span<const ExpressionLabel> labels);

ExpressionResult expression_agreement(std::span<const ExpressionLabel> original,
                                      std::span<const ExpressionLabel> privatized);

}  // namespace deid::eval
