#pragma once

#include <filesystem>
#include <random>
#include <string>

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(std::string const& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("nfsense-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(TempDir const&) = delete;
  TempDir& operator=(TempDir const&) = delete;
};
