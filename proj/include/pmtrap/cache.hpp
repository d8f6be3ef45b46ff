#pragma once

// On-disk cache of solved basis field sets, keyed by a content hash of the
// layout and mesh. Files that fail the embedded hash check are refused and
// recomputed rather than trusted.

#include <filesystem>
#include <fstream>
#include <string>

#include "pmtrap/field_engine.hpp"

namespace pmtrap {

struct CacheSettings {
    std::string directory = "pmtrap-cache";
    bool enabled = true;
};

inline std::string basis_cache_filename(const ElectrodeLayout& layout, const MeshParams& mesh) {
    return "basis-" + hex16(layout.content_hash() ^ (mesh.content_hash() * 0x9e3779b97f4a7c15ull)) +
           ".bin";
}

struct CachedSolve {
    BasisFieldSet basis;
    bool from_cache = false;
    std::string path;
};

/// Loads the basis from the cache when a valid entry exists, otherwise
/// solves and stores the result.
inline CachedSolve solve_with_cache(const ElectrodeLayout& layout, const MeshParams& mesh,
                                    const CacheSettings& cache) {
    namespace fs = std::filesystem;
    CachedSolve out{BasisFieldSet{}, false, ""};
    fs::path file;
    if (cache.enabled) {
        file = fs::path(cache.directory) / basis_cache_filename(layout, mesh);
        out.path = file.string();
        std::ifstream in(file, std::ios::binary);
        if (in) {
            try {
                out.basis = BasisFieldSet::deserialize(in);
                if (out.basis.layout().content_hash() == layout.content_hash()) {
                    out.from_cache = true;
                    return out;
                }
            } catch (const std::exception&) {
                // refused: stale or corrupt entry, fall through and recompute
            }
        }
    }
    out.basis = BasisFieldSet::solve(layout, mesh);
    if (cache.enabled) {
        std::error_code ec;
        fs::create_directories(fs::path(cache.directory), ec);
        const fs::path tmp = file.string() + ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (os) out.basis.serialize(os);
        }
        fs::rename(tmp, file, ec);
        if (ec) fs::remove(tmp, ec);
    }
    return out;
}

}  // namespace pmtrap
