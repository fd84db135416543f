#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/jsonl.hpp"
#include "matvqa/common/text.hpp"

namespace matvqa::corpus {

/// Metadata returned by the arXiv search API.
struct PaperStub {
    std::string id;
    std::string title;
    std::string abstract;
    std::string published; // ISO-8601 UTC, e.g. 2024-03-01T17:59:59Z
    std::vector<std::string> categories;

    bool operator==(const PaperStub &) const = default;
};

struct ImageRef {
    std::filesystem::path path; // relative to the paper's source_dir
    std::string sha256;
    std::string media_type;

    bool operator==(const ImageRef &) const = default;
};

struct ContextSnippet {
    std::string text;
    text::Span span;
    std::size_t distance{0}; // paragraphs away from the referencing paragraph

    bool operator==(const ContextSnippet &) const = default;
};

struct FigureAsset {
    std::string figure_id;
    ImageRef image;
    std::string caption;
    int page{0};
    int number{0}; // figure number used to match "Figure N" references
    std::vector<ContextSnippet> context;

    bool operator==(const FigureAsset &) const = default;
};

struct PaperRecord {
    std::string paper_id;
    std::string title;
    std::string body_text;
    std::vector<FigureAsset> figures;
    std::filesystem::path source_dir;
    std::optional<std::string> domain;
    std::vector<std::string> warnings;

    const FigureAsset *find_figure(std::string_view figure_id) const {
        for(const auto &f : figures)
            if(f.figure_id == figure_id) return &f;
        return nullptr;
    }
};

inline std::string media_type_for(const std::filesystem::path &p) {
    auto ext = text::to_lower(p.extension().string());
    if(ext == ".png") return "image/png";
    if(ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if(ext == ".gif") return "image/gif";
    if(ext == ".webp") return "image/webp";
    return "application/octet-stream";
}

inline void to_json(json &j, const PaperStub &s) {
    j = json{{"id", s.id}, {"title", s.title}, {"abstract", s.abstract},
             {"published", s.published}, {"categories", s.categories}};
}

inline void from_json(const json &j, PaperStub &s) {
    s.id = j.at("id").get<std::string>();
    s.title = j.value("title", "");
    s.abstract = j.value("abstract", "");
    s.published = j.value("published", "");
    s.categories = j.value("categories", std::vector<std::string>{});
}

inline void to_json(json &j, const ContextSnippet &c) {
    j = json{{"text", c.text}, {"span", {c.span.begin, c.span.end}}, {"distance", c.distance}};
}

inline void from_json(const json &j, ContextSnippet &c) {
    c.text = j.at("text").get<std::string>();
    c.span = {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
    c.distance = j.at("distance").get<std::size_t>();
}

inline void to_json(json &j, const FigureAsset &f) {
    j = json{{"figure_id", f.figure_id},
             {"image", {{"path", f.image.path.generic_string()},
                        {"sha256", f.image.sha256},
                        {"media_type", f.image.media_type}}},
             {"caption", f.caption},
             {"page", f.page},
             {"number", f.number},
             {"context", f.context}};
}

inline void from_json(const json &j, FigureAsset &f) {
    f.figure_id = j.at("figure_id").get<std::string>();
    const auto &img = j.at("image");
    f.image.path = img.at("path").get<std::string>();
    f.image.sha256 = img.at("sha256").get<std::string>();
    f.image.media_type = img.value("media_type", "application/octet-stream");
    f.caption = j.at("caption").get<std::string>();
    f.page = j.value("page", 0);
    f.number = j.value("number", 0);
    f.context = j.value("context", std::vector<ContextSnippet>{});
}

inline void to_json(json &j, const PaperRecord &r) {
    j = json{{"paper_id", r.paper_id},   {"title", r.title},
             {"body_text", r.body_text}, {"figures", r.figures},
             {"source_dir", r.source_dir.generic_string()},
             {"warnings", r.warnings}};
    if(r.domain) j["domain"] = *r.domain;
}

inline void from_json(const json &j, PaperRecord &r) {
    r.paper_id = j.at("paper_id").get<std::string>();
    r.title = j.value("title", "");
    r.body_text = j.at("body_text").get<std::string>();
    r.figures = j.at("figures").get<std::vector<FigureAsset>>();
    r.source_dir = j.value("source_dir", "");
    r.warnings = j.value("warnings", std::vector<std::string>{});
    if(j.contains("domain")) r.domain = j.at("domain").get<std::string>();
}

} // namespace matvqa::corpus
