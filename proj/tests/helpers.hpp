#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "lumbarseg/rng.hpp"
#include "lumbarseg/volume.hpp"

namespace lseg::test {

// Fresh empty directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("lumbarseg_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline Volume random_volume(Dims3 dims, Spacing3 sp, Rng& rng, double lo = 0.0,
                            double hi = 100.0) {
  Volume v;
  v.dims = dims;
  v.spacing = sp;
  v.data.resize(size_t(dims.count()));
  for (auto& x : v.data) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace lseg::test
