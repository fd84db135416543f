#pragma once

#include <optional>
#include <regex>
#include <string>

namespace matvqa::eval {

/// Applies `answer is\s*([0-9])` case-insensitively and takes the last match.
/// A captured digit outside [1, option_count] yields nullopt.
inline std::optional<std::size_t> extract_answer(std::string_view response, std::size_t option_count = 4) {
    static const std::regex pattern(R"(answer is\s*([0-9]))", std::regex::icase);
    std::string s(response);
    std::optional<std::size_t> last;
    for(auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it)
        last = static_cast<std::size_t>((*it)[1].str()[0] - '0');
    if(!last || *last < 1 || *last > option_count) return std::nullopt;
    return last;
}

} // namespace matvqa::eval
