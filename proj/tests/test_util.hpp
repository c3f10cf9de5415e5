#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "trafficlens/gridio.hpp"

namespace trafficlens::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("trafficlens_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    auto p = path_ / name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Monday 2019-03-18 00:00.
inline Minutes monday() { return parse_timestamp("2019-03-18T00:00"); }

inline ServiceTrafficMatrix make_matrix(std::size_t n_rows, std::size_t n_cols, std::size_t n_slots,
                                        std::vector<double> values, std::string service = "tor",
                                        Minutes start = monday()) {
  GridGeometry g{0.0, 0.0, 100.0, n_rows, n_cols};
  TimeGrid t{start, kSlotMinutes, n_slots};
  return ServiceTrafficMatrix(std::move(service), Direction::DL, g, t, std::move(values));
}

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double hi = 100.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace trafficlens::testing
