#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "lmv/fsutil.hpp"

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "lmv-test-XXXXXX").string();
        path = mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
    std::string subdir(const std::string& name) const {
        auto p = path / name;
        std::filesystem::create_directories(p);
        return p.string();
    }
};

inline void write(const std::string& path, const std::string& content) {
    lmv::write_file(path, content);
}

inline std::string read(const std::string& path) {
    auto content = lmv::read_file(path);
    return content ? *content : std::string{};
}

}  // namespace testutil
