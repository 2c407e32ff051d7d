#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

namespace halo {

// Persistent key-value store, one file per key under a cache directory.
// Writes go through a temp file + rename so concurrent writers of the
// same key (whose values are identical by construction) cannot corrupt
// each other. Shared by the LLM response cache and the embedding cache.
class CacheStore {
public:
    explicit CacheStore(std::filesystem::path dir);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);
    bool contains(const std::string& key) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path dir_;
    mutable std::mutex mu_;
};

}  // namespace halo
