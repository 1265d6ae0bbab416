#pragma once

// Directory polling: each scan lists the watched directory (top level only)
// and emits files that are present now but were absent from the previous
// known set, filtered to valid images. Newness is by path; the content hash
// taken at detection becomes the document id.

#include <stdexcept>
#include <string>
#include <vector>

#include "lmv/model.hpp"

namespace lmv {

class WatchError : public std::runtime_error {
public:
    explicit WatchError(const std::string& what) : std::runtime_error(what) {}
};

namespace watch {

struct ScanOptions {
    bool strict_magic = false;  // verify leading magic bytes match the extension
    // A brand-new file is admitted only when its size is unchanged across a
    // second stat this many ms later (guards half-written uploads). 0 skips
    // the settle pass.
    std::int64_t settle_ms = 50;
};

struct ScanResult {
    std::vector<DocumentFile> new_documents;   // sorted by path
    std::vector<std::string> ignored_non_images;  // newly seen non-image files
    MonitorState next_state;
};

// Extension must be one of png/jpg/jpeg/tif/tiff/bmp (case-insensitive);
// in strict mode the leading bytes must also match the format signature.
bool is_valid_image(const std::string& path, bool strict_magic);

// Pure with respect to (directory snapshot, state): rescanning an unchanged
// directory with the returned state yields no new documents. Throws
// WatchError when the directory cannot be listed.
ScanResult scan(const MonitorState& state, const ScanOptions& options = {});

}  // namespace watch
}  // namespace lmv
