#pragma once

#include <spdlog/spdlog.h>

#include <filesystem>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/corpus/context.hpp"
#include "matvqa/corpus/types.hpp"

namespace matvqa::corpus {

namespace fs = std::filesystem;

inline constexpr const char *kManifestName = "figures.manifest";
inline constexpr const char *kMetaName = "meta.json";

/// One line of figures.manifest.
struct ManifestEntry {
    std::string figure_id;
    std::string image_file;
    std::string caption;
    int page{0};

    bool operator==(const ManifestEntry &) const = default;
};

inline void to_json(json &j, const ManifestEntry &e) {
    j = json{{"figure_id", e.figure_id}, {"image_file", e.image_file}, {"caption", e.caption}, {"page", e.page}};
}

inline std::vector<ManifestEntry> read_manifest(const fs::path &path) {
    if(!fs::exists(path)) throw Error(ErrorCode::import, "missing manifest " + path.string());
    std::vector<json> rows;
    try {
        rows = parse_jsonl(read_file(path), path.string());
    } catch(const ParseError &e) {
        throw Error(ErrorCode::import, e.what());
    }
    std::vector<ManifestEntry> out;
    std::size_t line = 0;
    for(const auto &row : rows) {
        ++line;
        try {
            out.push_back({row.at("figure_id").get<std::string>(), row.at("image_file").get<std::string>(),
                           row.value("caption", ""), row.value("page", 0)});
        } catch(const json::exception &e) {
            throw Error(ErrorCode::import, path.string() + ": record " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

/// Manifest lines reproduced from an imported record.
inline std::string to_manifest(const PaperRecord &record) {
    std::string out;
    for(const auto &f : record.figures) {
        ManifestEntry e{f.figure_id, f.image.path.generic_string(), f.caption, f.page};
        out += canonical_dump(json(e)) + "\n";
    }
    return out;
}

namespace detail {

inline std::string first_heading(std::string_view body) {
    for(const auto &line : text::split(body, '\n')) {
        auto t = text::trim(line);
        if(t.starts_with("#")) return text::trim(t.substr(t.find_first_not_of('#')));
    }
    return {};
}

/// Figure numbers from figure ids ("fig3", "Figure_3", "3"). Falls back to
/// manifest order when any id lacks a number or two ids share one.
inline std::vector<int> assign_numbers(const std::vector<ManifestEntry> &entries, bool &fell_back) {
    static const std::regex digits(R"((\d+))");
    std::vector<int> numbers;
    std::set<int> seen;
    fell_back = false;
    for(const auto &e : entries) {
        std::smatch m;
        if(!std::regex_search(e.figure_id, m, digits) || !seen.insert(std::stoi(m[1].str())).second) {
            fell_back = true;
            break;
        }
        numbers.push_back(std::stoi(m[1].str()));
    }
    if(fell_back) {
        numbers.clear();
        for(std::size_t i = 0; i < entries.size(); ++i) numbers.push_back(static_cast<int>(i + 1));
    }
    return numbers;
}

} // namespace detail

/// Imports a converter output directory: exactly one markdown body, an images
/// directory and figures.manifest (one JSON record per line with figure_id,
/// image_file, caption, page). An optional meta.json may supply paper_id,
/// title and domain.
inline PaperRecord import_parsed_paper(const fs::path &dir, std::size_t context_window = 1) {
    if(!fs::is_directory(dir)) throw Error(ErrorCode::import, "not a directory: " + dir.string());

    std::vector<fs::path> markdown;
    for(const auto &entry : fs::directory_iterator(dir))
        if(entry.is_regular_file() && entry.path().extension() == ".md") markdown.push_back(entry.path());
    if(markdown.size() != 1)
        throw Error(ErrorCode::import, dir.string() + ": expected exactly one markdown body, found " +
                                           std::to_string(markdown.size()));

    PaperRecord record;
    record.source_dir = dir;
    record.body_text = read_file(markdown.front());
    if(text::trim(record.body_text).empty())
        throw Error(ErrorCode::import, "empty markdown body " + markdown.front().string());

    json meta = json::object();
    if(fs::exists(dir / kMetaName)) {
        try {
            meta = json::parse(read_file(dir / kMetaName));
        } catch(const json::exception &e) {
            throw Error(ErrorCode::import, (dir / kMetaName).string() + ": " + e.what());
        }
    }
    record.paper_id = meta.value("paper_id", dir.filename().string());
    record.title = meta.value("title", detail::first_heading(record.body_text));
    if(record.title.empty()) record.title = record.paper_id;
    if(meta.contains("domain")) record.domain = meta.at("domain").get<std::string>();

    const auto manifest_path = dir / kManifestName;
    auto entries = read_manifest(manifest_path);
    bool fell_back = false;
    auto numbers = detail::assign_numbers(entries, fell_back);
    if(fell_back && !entries.empty()) {
        std::string msg = "ambiguous figure numbering in " + manifest_path.string() + "; using manifest order";
        spdlog::warn("[import]: {}", msg);
        record.warnings.push_back(msg);
    }

    std::set<std::string> ids;
    for(std::size_t i = 0; i < entries.size(); ++i) {
        const auto &e = entries[i];
        if(!ids.insert(e.figure_id).second)
            throw Error(ErrorCode::import, manifest_path.string() + ": duplicate figure_id " + e.figure_id);
        if(text::trim(e.caption).empty())
            throw Error(ErrorCode::import, manifest_path.string() + ": empty caption for " + e.figure_id);
        auto image_path = dir / e.image_file;
        if(!fs::is_regular_file(image_path))
            throw Error(ErrorCode::import, manifest_path.string() + ": dangling image reference " + e.image_file);

        FigureAsset fig;
        fig.figure_id = e.figure_id;
        fig.image = {fs::path(e.image_file), sha256_file(image_path), media_type_for(image_path)};
        fig.caption = e.caption;
        fig.page = e.page;
        fig.number = numbers[i];
        auto ctx = link_context(record.body_text, fig.number, context_window);
        fig.context = std::move(ctx.snippets);
        if(ctx.unreferenced) {
            std::string msg = "figure " + fig.figure_id + " is never referenced in the body";
            spdlog::warn("[import]: {}: {}", record.paper_id, msg);
            record.warnings.push_back(msg);
        }
        record.figures.push_back(std::move(fig));
    }
    return record;
}

} // namespace matvqa::corpus
