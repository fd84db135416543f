#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "matvqa/chain/types.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::testing {

inline std::filesystem::path fixtures() { return MATVQA_FIXTURE_DIR; }
inline std::filesystem::path config_dir() { return MATVQA_CONFIG_DIR; }

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        m_path = std::filesystem::temp_directory_path() /
                 ("matvqa-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return m_path; }
    std::filesystem::path operator/(const std::string &name) const { return m_path / name; }

private:
    std::filesystem::path m_path;
};

/// A valid raw item; option 1 is the right one.
inline mcq::MCQItem make_item(const std::string &tag, mcq::TaskType task = mcq::TaskType::causal,
                              std::size_t m = 4) {
    mcq::MCQItem item;
    item.task = task;
    item.stem = "Which outcome does figure " + tag + " support?";
    item.options.push_back("Outcome " + tag + " is right");
    for(std::size_t i = 1; i < m; ++i) item.options.push_back("Wrong outcome number " + std::to_string(i) + " for " + tag);
    item.answer_index = 1;
    item.figure_id = "fig1";
    item.chain_id = "paper-" + tag + "/fig1";
    item.paper_id = "paper-" + tag;
    item.image_hash = std::string(64, 'a');
    item.image_media_type = "image/png";
    item.caption = "Caption for " + tag;
    item.chain_summary = "a (S) -> b (Pe)";
    item.item_id = mcq::compute_item_id(item);
    return item;
}

} // namespace matvqa::testing
