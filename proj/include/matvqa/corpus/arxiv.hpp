#pragma once

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "matvqa/common/error.hpp"
#include "matvqa/common/rate_limit.hpp"
#include "matvqa/corpus/types.hpp"

namespace matvqa::corpus {

/// Fetches a URL and returns the body. Throws RetryableError on transient
/// failure.
using Transport = std::function<std::string(const std::string &url)>;

struct FetchOptions {
    std::string endpoint = "http://export.arxiv.org/api/query";
    std::size_t page_size = 100;
    std::size_t retry_limit = 3;
    std::chrono::milliseconds backoff{1000};
    /// arXiv asks clients to leave ~3 s between requests.
    std::shared_ptr<TokenBucket> limiter = std::make_shared<TokenBucket>(1.0, 1.0 / 3.0);
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
};

inline std::string url_encode(std::string_view s) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for(unsigned char c : s) {
        if(std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == ':') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xf]);
        }
    }
    return out;
}

namespace detail {

inline std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for(char c : s) {
        if(std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
        } else {
            if(space) out.push_back(' ');
            space = false;
            out.push_back(c);
        }
    }
    return out;
}

inline std::string strip_abs_prefix(const std::string &id) {
    auto pos = id.find("/abs/");
    return pos == std::string::npos ? id : id.substr(pos + 5);
}

} // namespace detail

/// Parses an arXiv Atom feed into stubs, in feed order.
inline std::vector<PaperStub> parse_atom_feed(const std::string &xml) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(xml);
    try {
        pt::read_xml(in, tree);
    } catch(const pt::xml_parser_error &e) {
        throw ParseError("malformed feed: " + e.message(), e.line());
    }
    auto feed = tree.get_child_optional("feed");
    if(!feed) throw ParseError("malformed feed: missing <feed> root");

    static const std::regex iso_date(R"(^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$)");
    std::vector<PaperStub> out;
    std::size_t index = 0;
    for(const auto &[name, entry] : *feed) {
        if(name != "entry") continue;
        ++index;
        PaperStub stub;
        auto raw_id = detail::collapse_ws(entry.get<std::string>("id", ""));
        std::string label = raw_id.empty() ? "#" + std::to_string(index) : raw_id;
        if(raw_id.find("api/errors") != std::string::npos)
            throw ParseError("malformed feed: API error entry " + label + ": " +
                             detail::collapse_ws(entry.get<std::string>("summary", "")));
        if(raw_id.empty()) throw ParseError("malformed feed: entry " + label + " has no <id>");
        stub.id = detail::strip_abs_prefix(raw_id);
        stub.title = detail::collapse_ws(entry.get<std::string>("title", ""));
        stub.abstract = detail::collapse_ws(entry.get<std::string>("summary", ""));
        stub.published = detail::collapse_ws(entry.get<std::string>("published", ""));
        if(!std::regex_match(stub.published, iso_date))
            throw ParseError("malformed feed: entry " + label + " has invalid <published> '" +
                             stub.published + "'");
        for(const auto &[child_name, child] : entry) {
            if(child_name != "category") continue;
            if(auto term = child.get_optional<std::string>("<xmlattr>.term")) stub.categories.push_back(*term);
        }
        out.push_back(std::move(stub));
    }
    return out;
}

/// Plain-HTTP transport via cpp-httplib. 429/5xx and connection failures map to
/// RetryableError.
inline Transport http_transport() {
    return [](const std::string &url) -> std::string {
        static const std::regex split_url(R"(^(https?://[^/]+)(/.*)$)");
        std::smatch m;
        if(!std::regex_match(url, m, split_url)) throw Error(ErrorCode::usage, "bad url " + url);
        httplib::Client client(m[1].str());
        client.set_follow_location(true);
        client.set_read_timeout(60, 0);
        auto res = client.Get(m[2].str());
        if(!res) throw RetryableError("arxiv: " + httplib::to_string(res.error()));
        if(res->status == 429 || res->status >= 500)
            throw RetryableError("arxiv: HTTP " + std::to_string(res->status));
        if(res->status != 200)
            throw Error(ErrorCode::network, "arxiv: HTTP " + std::to_string(res->status));
        return res->body;
    };
}

/// Calls `fn` up to `limit` times while it throws RetryableError, sleeping with
/// linear backoff between attempts.
template <typename Fn>
auto with_retries(std::size_t limit, std::chrono::milliseconds backoff,
                  const std::function<void(std::chrono::milliseconds)> &sleep, Fn &&fn) {
    limit = std::max<std::size_t>(limit, 1);
    for(std::size_t attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch(const RetryableError &e) {
            if(attempt >= limit) throw RetryableError(e.what(), attempt);
            if(sleep) sleep(backoff * static_cast<int>(attempt));
        }
    }
}

/// Searches arXiv and returns at most max_results stubs, newest submission
/// first. Pages are requested in submittedDate-descending order and merged.
inline std::vector<PaperStub> fetch_metadata(const std::string &query, std::size_t max_results,
                                             const Transport &transport,
                                             const FetchOptions &options = {}) {
    require(!text::trim(query).empty(), "fetch_metadata: query must be non-empty");
    require(max_results >= 1, "fetch_metadata: max_results must be >= 1");

    std::vector<PaperStub> collected;
    std::set<std::string> seen;
    std::size_t start = 0;
    const std::size_t page = std::max<std::size_t>(options.page_size, 1);
    while(collected.size() < max_results) {
        std::size_t want = std::min(page, max_results - collected.size());
        std::string url = options.endpoint + "?search_query=" + url_encode(query) +
                          "&start=" + std::to_string(start) + "&max_results=" + std::to_string(want) +
                          "&sortBy=submittedDate&sortOrder=descending";
        auto body = with_retries(options.retry_limit, options.backoff, options.sleep, [&] {
            if(options.limiter) options.limiter->acquire();
            return transport(url);
        });
        auto entries = parse_atom_feed(body);
        std::size_t fresh = 0;
        for(auto &e : entries) {
            if(!seen.insert(e.id).second) continue;
            collected.push_back(std::move(e));
            ++fresh;
        }
        if(fresh == 0 || entries.size() < want) break;
        start += entries.size();
    }
    std::stable_sort(collected.begin(), collected.end(),
                     [](const PaperStub &a, const PaperStub &b) { return a.published > b.published; });
    if(collected.size() > max_results) collected.resize(max_results);
    return collected;
}

} // namespace matvqa::corpus
