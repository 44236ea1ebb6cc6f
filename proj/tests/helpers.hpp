#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>
#include <unistd.h>

#include "setgeo/error.hpp"

// Asserts that `expr` throws setgeo::Error with the given code.
#define CHECK_ERROR_CODE(expr, expected)                                   \
  do {                                                                     \
    bool thrown_ = false;                                                  \
    try {                                                                  \
      (void)(expr);                                                        \
    } catch (const setgeo::Error& e_) {                                    \
      thrown_ = true;                                                      \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());                   \
    }                                                                      \
    CHECK_MESSAGE(thrown_, "expected setgeo::Error from " #expr);          \
  } while (0)

namespace testing {

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("setgeo_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
