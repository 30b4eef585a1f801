#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include <lanekit/lanekit.hpp>

namespace lanekit::test {

inline constexpr int kPropertyCases = 200;

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline ImageBuffer random_image(std::mt19937_64& rng, int w, int h, int channels = 3) {
    ImageBuffer img(w, h, channels);
    std::uniform_int_distribution<int> d(0, 255);
    for (auto& s : img.samples()) s = static_cast<std::uint8_t>(d(rng));
    return img;
}

inline PlaneF32 random_plane(std::mt19937_64& rng, int w, int h, float lo = -1.0f, float hi = 1.0f) {
    PlaneF32 p(w, h);
    std::uniform_real_distribution<float> d(lo, hi);
    for (auto& v : p.samples()) v = d(rng);
    return p;
}

/// Smooth RGB test image: low-frequency sinusoids, no hard edges.
inline ImageBuffer smooth_image(int w, int h) {
    ImageBuffer img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = static_cast<std::uint8_t>(std::lround(127.5 + 100.0 * std::sin(x * 0.05) * std::cos(y * 0.04)));
            img.at(x, y, 1) = static_cast<std::uint8_t>(std::lround(127.5 + 90.0 * std::cos(x * 0.03 + y * 0.02)));
            img.at(x, y, 2) = static_cast<std::uint8_t>(std::lround(127.5 + 80.0 * std::sin((x + y) * 0.025)));
        }
    return img;
}

/// Marks every pixel within half_width of each fit, row by row.
inline BinaryMask lane_mask(int w, int h, const LaneFit& left, const LaneFit& right, double half_width = 6.0) {
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (const LaneFit* f : {&left, &right}) {
            const double cx = f->x_at(y);
            for (int x = std::max(0, static_cast<int>(std::ceil(cx - half_width)));
                 x <= std::min(w - 1, static_cast<int>(std::floor(cx + half_width))); ++x)
                m.set(x, y);
        }
    return m;
}

inline LaneFit make_fit(double a, double b, double c) {
    LaneFit f;
    f.a = a;
    f.b = b;
    f.c = c;
    f.n_pixels = 3;
    return f;
}

/// Fresh scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("lanekit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace lanekit::test
