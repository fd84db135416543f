#pragma once

#include <algorithm>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/corpus/types.hpp"

namespace matvqa::corpus {

/// Append-only directory of imported papers:
///   index.jsonl              one line per paper: paper_id, record hash, figure hashes
///   papers/<paper_id>/record.json
///   blobs/<sha256>           image bytes, content-addressed
class CorpusStore {
public:
    explicit CorpusStore(std::filesystem::path root) : m_root(std::move(root)) {
        std::filesystem::create_directories(m_root / "papers");
        std::filesystem::create_directories(m_root / "blobs");
    }

    const std::filesystem::path &root() const { return m_root; }

    void put(const PaperRecord &record) {
        std::lock_guard lock(m_mutex);
        if(contains_unlocked(record.paper_id))
            throw Error(ErrorCode::conflict, "paper " + record.paper_id + " already in corpus store");
        json index_row{{"paper_id", record.paper_id}};
        json hashes = json::array();
        for(const auto &fig : record.figures) {
            auto blob = m_root / "blobs" / fig.image.sha256;
            if(!std::filesystem::exists(blob)) {
                auto bytes = read_file(record.source_dir / fig.image.path);
                if(sha256_hex(bytes) != fig.image.sha256)
                    throw Error(ErrorCode::import, "content hash mismatch for " +
                                                       (record.source_dir / fig.image.path).string());
                write_file(blob, bytes);
                write_file(media_path(fig.image.sha256), fig.image.media_type);
            }
            hashes.push_back(fig.image.sha256);
        }
        auto body = canonical_dump(json(record));
        write_file(record_path(record.paper_id), body);
        index_row["record_sha256"] = sha256_hex(body);
        index_row["figures"] = hashes;
        append_jsonl(m_root / "index.jsonl", index_row);
    }

    bool contains(std::string_view paper_id) const {
        std::lock_guard lock(m_mutex);
        return contains_unlocked(paper_id);
    }

    PaperRecord get(std::string_view paper_id) const {
        auto path = record_path(paper_id);
        if(!std::filesystem::exists(path))
            throw Error(ErrorCode::not_found, "paper " + std::string(paper_id) + " not in corpus store");
        return json::parse(read_file(path)).get<PaperRecord>();
    }

    /// Paper ids in index order.
    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for(const auto &row : read_jsonl(m_root / "index.jsonl")) out.push_back(row.at("paper_id").get<std::string>());
        return out;
    }

    bool has_blob(std::string_view sha256) const {
        return is_hash(sha256) && std::filesystem::exists(m_root / "blobs" / std::string(sha256));
    }

    std::string read_blob(std::string_view sha256) const {
        if(!has_blob(sha256)) throw Error(ErrorCode::not_found, "no blob " + std::string(sha256));
        return read_file(m_root / "blobs" / std::string(sha256));
    }

    std::string blob_media_type(std::string_view sha256) const {
        auto p = media_path(sha256);
        return std::filesystem::exists(p) ? read_file(p) : "application/octet-stream";
    }

private:
    static bool is_hash(std::string_view s) {
        return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
                   return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
               });
    }

    static std::string dir_name(std::string_view paper_id) {
        std::string out(paper_id);
        std::replace(out.begin(), out.end(), '/', '_');
        return out;
    }

    std::filesystem::path record_path(std::string_view paper_id) const {
        return m_root / "papers" / dir_name(paper_id) / "record.json";
    }

    std::filesystem::path media_path(std::string_view sha256) const {
        return m_root / "blobs" / (std::string(sha256) + ".type");
    }

    bool contains_unlocked(std::string_view paper_id) const {
        return std::filesystem::exists(record_path(paper_id));
    }

    std::filesystem::path m_root;
    mutable std::mutex m_mutex;
};

} // namespace matvqa::corpus
