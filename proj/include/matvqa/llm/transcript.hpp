#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/llm/backend.hpp"

namespace matvqa::llm {

// Transcript file layout: one canonical JSON TranscriptEntry per line, then a
// trailer line {"checksum": <sha256 of every preceding byte>, "entries": N}.

inline std::string serialize_transcript(const std::vector<TranscriptEntry> &entries) {
    std::string body;
    for(const auto &e : entries) body += canonical_dump(json(e)) + "\n";
    json trailer{{"checksum", sha256_hex(body)}, {"entries", entries.size()}};
    return body + canonical_dump(trailer) + "\n";
}

inline void record_transcript(const std::vector<TranscriptEntry> &entries, const std::filesystem::path &path) {
    for(const auto &e : entries)
        require(e.request_hash == request_hash(e.request), "transcript entry hash does not match its request");
    write_file(path, serialize_transcript(entries));
}

inline std::vector<TranscriptEntry> parse_transcript(std::string_view content) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while(pos < content.size()) {
        auto nl = content.find('\n', pos);
        auto end = nl == std::string_view::npos ? content.size() : nl;
        lines.push_back(content.substr(pos, end - pos));
        pos = end + 1;
    }
    while(!lines.empty() && lines.back().find_first_not_of(" \t\r") == std::string_view::npos) lines.pop_back();
    if(lines.empty()) throw ParseError("transcript: missing checksum trailer", 1);

    json trailer;
    try {
        trailer = json::parse(lines.back());
    } catch(const json::parse_error &) {
        throw ParseError("transcript: malformed checksum trailer", lines.size());
    }
    if(!trailer.is_object() || !trailer.contains("checksum"))
        throw ParseError("transcript: missing checksum trailer", lines.size());

    std::vector<TranscriptEntry> entries;
    for(std::size_t i = 0; i + 1 < lines.size(); ++i) {
        try {
            entries.push_back(json::parse(lines[i]).get<TranscriptEntry>());
        } catch(const json::exception &e) {
            throw ParseError(std::string("transcript: corrupt entry: ") + e.what(), i + 1);
        }
    }

    auto body_end = static_cast<std::size_t>(lines.back().data() - content.data());
    if(sha256_hex(content.substr(0, body_end)) != trailer.at("checksum").get<std::string>())
        throw Error(ErrorCode::checksum, "transcript: checksum mismatch");
    for(std::size_t i = 0; i < entries.size(); ++i)
        if(request_hash(entries[i].request) != entries[i].request_hash)
            throw Error(ErrorCode::checksum,
                        "transcript: request hash mismatch (line " + std::to_string(i + 1) + ")");
    return entries;
}

inline std::vector<TranscriptEntry> read_transcript(const std::filesystem::path &path) {
    return parse_transcript(read_file(path));
}

inline std::shared_ptr<ReplayBackend> load_transcript(const std::filesystem::path &path) {
    return std::make_shared<ReplayBackend>(read_transcript(path));
}

} // namespace matvqa::llm
