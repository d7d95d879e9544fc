#pragma once

#include "drift/errors.hpp"

#include <filesystem>
#include <system_error>

namespace drift {

/// create_directories that reports failure as IoError.
inline void ensure_directory(const std::filesystem::path& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace drift
