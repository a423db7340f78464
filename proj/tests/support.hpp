#pragma once

#include "camfuse/imaging.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace testing {

inline camfuse::Plane random_plane(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 255.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    camfuse::Plane p(w, h);
    for (double& v : p.values()) v = u(rng);
    return p;
}

inline camfuse::RgbImage random_rgb(int w, int h, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(0, 255);
    camfuse::RgbImage img(w, h);
    for (double& v : img.samples()) v = u(rng);
    return img;
}

// Textbook two-pass Pearson correlation.
inline double pearson_oracle(std::span<const double> a, std::span<const double> b)
{
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// O(n^2) pair counting, ties count one half.
inline double auc_oracle(std::span<const double> s, std::span<const int> labels)
{
    double wins = 0;
    double pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (labels[j] == 1) continue;
            pairs += 1;
            if (s[i] > s[j]) wins += 1;
            if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

inline double rms(std::span<const double> v)
{
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("camfuse-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
