#pragma once

#include <cstddef>
#include <optional>

namespace matvqa::testing {

struct ExtractCase {
    const char *response;
    std::size_t m;
    std::optional<std::size_t> expected;
};

// Expected values from Python re.findall(r'answer is\s*([0-9])', s, re.I),
// last match, then the [1, m] range check.
inline constexpr ExtractCase kExtractCases[] = {
    {"the answer is 3", 4, 3},
    {"The answer is 2.", 4, 2},
    {"THE ANSWER IS 4!", 4, 4},
    {"The answer is (1)", 4, std::nullopt},
    {"The answer is 1. Wait, the answer is 3", 4, 3},
    {"answer is 2\nanswer is 4\nThe answer is 1", 4, 1},
    {"I think option 2 fits best.", 4, std::nullopt},
    {"", 4, std::nullopt},
    {"The answer is: 2", 4, std::nullopt},
    {"The answer is  \t3", 4, 3},
    {"The answer is\n2", 4, 2},
    {"The answer is 5", 4, std::nullopt},
    {"The answer is 0", 4, std::nullopt},
    {"The answer is 12", 4, 1},
    {"The answer is three", 4, std::nullopt},
    {"My final answer is 4.", 4, 4},
    {"Theanswer is 2", 4, 2},
    {"The answer is 5", 6, 5},
    {"The answer is 3; the answer is 9", 4, std::nullopt},
    {"Step 1: ... Step 2: ... The Answer Is 2**", 4, 2},
};

struct AblationRow {
    const char *model;
    double raw, lang, cap;
    double lang_drop, cap_drop;
};

// Reference stage scores per model and the drops they should yield, in points.
inline constexpr AblationRow kAblationRows[] = {
    {"GPT-4o", 78.8, 67.8, 48.3, 11.0, 30.5},          {"GPT-4o-mini", 72.4, 57.4, 39.3, 15.0, 33.1},
    {"Claude-3.7-Sonnet", 82.7, 71.6, 51.9, 11.1, 30.8}, {"Claude-3.5-Haiku", 75.3, 65.0, 44.7, 10.3, 30.6},
    {"o1", 79.6, 68.3, 48.6, 11.3, 31.0},              {"Gemini-1.5-Pro", 76.4, 63.2, 44.2, 13.2, 32.2},
};

} // namespace matvqa::testing
