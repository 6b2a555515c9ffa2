#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace anc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Row-major matrix: one contiguous row per channel/microphone.
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ----- errors -----

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class SingularityError : public Error {
public:
  using Error::Error;
};

// Adaptive weights left the finite/stable region.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, long step, double last_norm)
      : Error(what), step(step), last_finite_norm(last_norm) {}
  long step;
  double last_finite_norm;
};

class InfeasibleError : public Error {
public:
  using Error::Error;
};

// ----- logging -----

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ANC_LOG");
    if (env == nullptr) return LogLevel::warn;
    const std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "warn") return LogLevel::warn;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

inline void log_msg(LogLevel level, const std::string& msg) {
  if (level > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[anc:%s] %s\n", names[static_cast<int>(level)],
               msg.c_str());
}

inline void log_info(const std::string& msg) { log_msg(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_msg(LogLevel::debug, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::warn, msg); }

// ----- seeding and digests -----

// splitmix64 step; used to derive independent stream seeds from one master.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x632be59bd9b4e019ULL + stream * 0x9e3779b97f4a7c15ULL);
  splitmix64(s);
  return splitmix64(s);
}

class Fnv1a64 {
public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void update_value(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    update(&v, sizeof(v));
  }
  void update_vector(const VectorXd& v) {
    update(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  std::uint64_t digest() const { return hash_; }
  std::string hex() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_));
    return buf;
  }

private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

// ----- raw little-endian float32 payloads -----

inline std::vector<float> read_f32_file(const std::string& path,
                                        std::int64_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raw float file: " + path);
  in.seekg(0, std::ios::end);
  const std::int64_t bytes = in.tellg();
  in.seekg(0, std::ios::beg);
  if (bytes % 4 != 0)
    throw IoError("raw float file size not a multiple of 4: " + path);
  const std::int64_t count = bytes / 4;
  if (expected_count >= 0 && count != expected_count)
    throw ValidationError("raw float file " + path + " holds " +
                          std::to_string(count) + " values, expected " +
                          std::to_string(expected_count));
  std::vector<float> out(static_cast<std::size_t>(count));
  if (count > 0) in.read(reinterpret_cast<char*>(out.data()), bytes);
  if (!in) throw IoError("short read on raw float file: " + path);
  return out;
}

inline void write_f32_file(const std::string& path,
                           const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write raw float file: " + path);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * 4));
  if (!out) throw IoError("short write on raw float file: " + path);
}

inline bool all_finite(const VectorXd& v) { return v.allFinite(); }

}  // namespace anc
