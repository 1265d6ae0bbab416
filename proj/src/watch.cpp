#include "lmv/watch.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <thread>

#include "lmv/digest.hpp"

namespace lmv::watch {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return {};
    std::string ext = path.substr(dot + 1);
    for (char& c : ext)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return ext;
}

bool magic_matches(const std::string& path, MediaType type) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    std::array<unsigned char, 8> head{};
    std::size_t n = std::fread(head.data(), 1, head.size(), f);
    std::fclose(f);
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    switch (type) {
        case MediaType::png:
            return n >= 8 && std::memcmp(head.data(), png_sig, 8) == 0;
        case MediaType::jpeg:
            return n >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF;
        case MediaType::tiff:
            return n >= 4 && ((head[0] == 'I' && head[1] == 'I' && head[2] == 0x2A && head[3] == 0) ||
                              (head[0] == 'M' && head[1] == 'M' && head[2] == 0 && head[3] == 0x2A));
        case MediaType::bmp:
            return n >= 2 && head[0] == 'B' && head[1] == 'M';
    }
    return false;
}

}  // namespace

bool is_valid_image(const std::string& path, bool strict_magic) {
    auto type = media_type_from_extension(lower_ext(path));
    if (!type) return false;
    if (!strict_magic) return true;
    return magic_matches(path, *type);
}

ScanResult scan(const MonitorState& state, const ScanOptions& options) {
    std::map<std::string, std::uintmax_t> listing;  // path -> size
    std::error_code ec;
    fs::directory_iterator it(state.directory, ec);
    if (ec) throw WatchError("cannot list \"" + state.directory + "\": " + ec.message());
    for (const auto& entry : fs::directory_iterator(state.directory, ec)) {
        std::error_code fec;
        if (!entry.is_regular_file(fec) || fec) continue;
        std::uintmax_t size = entry.file_size(fec);
        if (fec) continue;
        listing.emplace(entry.path().string(), size);
    }
    if (ec) throw WatchError("cannot list \"" + state.directory + "\": " + ec.message());

    std::vector<std::string> candidates;
    for (const auto& [path, size] : listing)
        if (!state.known_files.contains(path)) candidates.push_back(path);

    // Settle pass: a candidate whose size changed (or that vanished) is not
    // "present" yet; it stays out of known_files and is reconsidered on the
    // next scan.
    if (!candidates.empty() && options.settle_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(options.settle_ms));
        std::vector<std::string> stable;
        for (const auto& path : candidates) {
            std::error_code fec;
            std::uintmax_t size = fs::file_size(path, fec);
            if (fec || size != listing[path]) {
                listing.erase(path);
                continue;
            }
            stable.push_back(path);
        }
        candidates = std::move(stable);
    }

    ScanResult result;
    result.next_state = state;
    result.next_state.known_files.clear();

    std::map<std::string, std::string> hashes;
    for (const auto& path : candidates) {
        auto hash = sha256_file(path);
        if (!hash) {
            listing.erase(path);  // vanished between listing and hashing
            continue;
        }
        hashes[path] = *hash;
        if (is_valid_image(path, options.strict_magic)) {
            DocumentFile doc;
            doc.id = *hash;
            doc.path = path;
            doc.detected_at = wall_clock_ms();
            doc.media_type = *media_type_from_extension(lower_ext(path));
            result.new_documents.push_back(std::move(doc));
        } else {
            result.ignored_non_images.push_back(path);
        }
    }

    for (const auto& [path, size] : listing) {
        auto prev = state.known_files.find(path);
        if (prev != state.known_files.end()) {
            result.next_state.known_files[path] = prev->second;
        } else if (auto h = hashes.find(path); h != hashes.end()) {
            result.next_state.known_files[path] = h->second;
        }
    }

    std::sort(result.new_documents.begin(), result.new_documents.end(),
              [](const DocumentFile& a, const DocumentFile& b) { return a.path < b.path; });
    return result;
}

}  // namespace lmv::watch
