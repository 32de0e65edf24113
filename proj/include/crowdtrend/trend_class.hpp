#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace crowdtrend {

/// Class axis shared by consensus labels, the classifier and trend series.
enum class TrendClass { Positive = 0, Negative = 1, Neutral = 2, Irrelevant = 3 };

inline constexpr std::size_t kTrendClassCount = 4;
inline constexpr std::array<TrendClass, kTrendClassCount> kAllTrendClasses = {
    TrendClass::Positive, TrendClass::Negative, TrendClass::Neutral, TrendClass::Irrelevant};

constexpr std::string_view to_string(TrendClass c) {
    switch (c) {
        case TrendClass::Positive: return "positive";
        case TrendClass::Negative: return "negative";
        case TrendClass::Neutral: return "neutral";
        case TrendClass::Irrelevant: return "irrelevant";
    }
    return "?";
}

constexpr std::optional<TrendClass> trend_class_from_string(std::string_view s) {
    for (auto c : kAllTrendClasses) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

constexpr std::size_t index_of(TrendClass c) { return static_cast<std::size_t>(c); }

}  // namespace crowdtrend
