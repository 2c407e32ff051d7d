#include "halo/cache_store.hpp"

#include <fstream>
#include <sstream>

#include "halo/errors.hpp"

namespace halo {

namespace fs = std::filesystem;

CacheStore::CacheStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

fs::path CacheStore::path_for(const std::string& key) const {
    // Keys are hex digests; no escaping needed.
    return dir_ / (key + ".val");
}

std::optional<std::string> CacheStore::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool CacheStore::contains(const std::string& key) const {
    std::lock_guard lock(mu_);
    return fs::exists(path_for(key));
}

void CacheStore::put(const std::string& key, const std::string& value) {
    std::lock_guard lock(mu_);
    fs::path target = path_for(key);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cache file " + tmp.string());
        out << value;
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cache rename failed: " + ec.message());
}

}  // namespace halo
