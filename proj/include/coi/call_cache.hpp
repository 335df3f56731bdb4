#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>

#include "coi/error.hpp"
#include "coi/hashing.hpp"

namespace coi {

/// Directory-backed map from request-content hash to response payload.
///
/// Entries live at `<dir>/<key[0:2]>/<key>`. Writes go to a temporary file that is
/// renamed into place, so readers never observe a partial entry. A hit returns the
/// stored bytes unchanged.
class CallCache {
public:
    explicit CallCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    static std::string key_for(std::string_view request) { return sha256_hex(request); }

    std::optional<std::string> get(const std::string& key) const {
        auto path = path_for(key);
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            misses_.fetch_add(1, std::memory_order_relaxed);
            return std::nullopt;
        }
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        hits_.fetch_add(1, std::memory_order_relaxed);
        return data;
    }

    void put(const std::string& key, std::string_view payload) {
        std::lock_guard lock(write_mutex_);
        auto path = path_for(key);
        std::filesystem::create_directories(path.parent_path());
        auto tmp = path;
        tmp += ".tmp" + std::to_string(tmp_counter_++);
        write_file(tmp.string(), payload);
        std::filesystem::rename(tmp, path);
    }

    std::size_t hits() const noexcept { return hits_.load(); }
    std::size_t misses() const noexcept { return misses_.load(); }
    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const {
        if (key.size() < 3) throw InvalidArgument("cache key too short");
        return dir_ / key.substr(0, 2) / key;
    }

    std::filesystem::path dir_;
    std::mutex write_mutex_;
    std::size_t tmp_counter_ = 0;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

}  // namespace coi
