#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "folde/core/embeddings.hpp"
#include "folde/error.hpp"
#include "folde/service/state.hpp"

namespace folde::service {

inline constexpr const char* kDataDirEnv = "FOLDE_DATA_DIR";

// Explicit directory wins; otherwise FOLDE_DATA_DIR; otherwise ./campaigns.
inline std::filesystem::path resolve_data_dir(const std::string& explicit_dir = {}) {
    if (!explicit_dir.empty()) return explicit_dir;
    if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
    return "campaigns";
}

class NotFound : public Error {
public:
    using Error::Error;
};

// Exclusive advisory lock on a file, released on destruction.
class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error("cannot open lock file " + path.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error("cannot lock " + path.string());
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }

private:
    int fd_ = -1;
};

// One pretty-printed JSON file per campaign: <dir>/<id>.json.
class Store {
public:
    explicit Store(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::filesystem::path state_path(const std::string& id) const { return dir_ / (checked(id) + ".json"); }
    std::filesystem::path lock_path(const std::string& id) const { return dir_ / (checked(id) + ".lock"); }

    bool exists(const std::string& id) const { return std::filesystem::exists(state_path(id)); }

    CampaignState load(const std::string& id) const {
        const auto path = state_path(id);
        if (!std::filesystem::exists(path)) throw NotFound("no campaign '" + id + "'");
        const auto text = detail::read_file_bytes(path.string());
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw ParseError("corrupt state file " + path.string() + ": " + e.what());
        }
        return state_from_json(j);
    }

    // Write to a sibling temp file, flush to disk, then rename over the target.
    void save(const CampaignState& state) const {
        const auto path = state_path(state.id);
        const auto tmp = path.string() + ".tmp";
        const std::string text = to_json(state).dump(2) + "\n";
        {
            const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
            if (fd < 0) throw Error("cannot write " + tmp);
            std::size_t done = 0;
            while (done < text.size()) {
                const auto n = ::write(fd, text.data() + done, text.size() - done);
                if (n <= 0) {
                    ::close(fd);
                    throw Error("short write to " + tmp);
                }
                done += std::size_t(n);
            }
            ::fsync(fd);
            ::close(fd);
        }
        std::filesystem::rename(tmp, path);
    }

    std::vector<std::string> list() const {
        std::vector<std::string> ids;
        for (const auto& e : std::filesystem::directory_iterator(dir_))
            if (e.path().extension() == ".json" && valid_campaign_id(e.path().stem().string()))
                ids.push_back(e.path().stem().string());
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    std::string next_free_id() const {
        for (std::size_t n = 1;; ++n) {
            auto id = "campaign-" + std::to_string(n);
            if (!exists(id)) return id;
        }
    }

private:
    static const std::string& checked(const std::string& id) {
        if (!valid_campaign_id(id)) throw ParseError("invalid campaign id '" + id + "'");
        return id;
    }

    std::filesystem::path dir_;
};

}  // namespace folde::service
