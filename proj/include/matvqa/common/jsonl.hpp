#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"

namespace matvqa {

using json = nlohmann::json;

/// Compact dump with sorted keys (nlohmann objects are ordered maps), so equal
/// values always serialize to equal bytes.
inline std::string canonical_dump(const json &value) {
    return value.dump(-1, ' ', false, json::error_handler_t::strict);
}

/// Parses newline-delimited JSON. Blank lines are skipped; errors carry the
/// 1-based line number.
inline std::vector<json> parse_jsonl(std::string_view content, std::string_view what = "jsonl") {
    std::vector<json> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while(pos < content.size()) {
        auto nl = content.find('\n', pos);
        auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = nl == std::string_view::npos ? content.size() : nl + 1;
        if(line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch(const json::parse_error &e) {
            throw ParseError(std::string(what) + ": malformed record: " + e.what(), line_no);
        }
    }
    return out;
}

inline std::vector<json> read_jsonl(const std::filesystem::path &path) {
    if(!std::filesystem::exists(path)) return {};
    return parse_jsonl(read_file(path), path.string());
}

inline void append_jsonl(const std::filesystem::path &path, const json &record) {
    append_file(path, canonical_dump(record) + "\n");
}

} // namespace matvqa
