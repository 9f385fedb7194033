#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

namespace pcir::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(PCIR_FIXTURE_DIR) / name;
}

/// The prompt templates shipped with the project.
inline std::filesystem::path template_dir() { return PCIR_TEMPLATE_DIR; }

/// Fresh scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& label) {
        base_ = std::filesystem::temp_directory_path() /
                ("pcir_" + label + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter_++));
        std::filesystem::remove_all(base_);
        std::filesystem::create_directories(base_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(base_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return base_; }
    std::filesystem::path operator/(const std::string& name) const { return base_ / name; }

private:
    static inline int counter_ = 0;
    std::filesystem::path base_;
};

}  // namespace pcir::testing
