#pragma once

#include <cstdint>
#include <vector>

namespace qanno {

// Deterministic 64-bit generator (splitmix64). The standard <random> engines are
// portable, but the distributions are not pinned by the standard; simulation runs
// must produce identical streams on every build, so we draw everything ourselves.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next() % span);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent stream from a base seed and a stream tag.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        Rng mix(seed ^ (0xA0761D6478BD642FULL * (stream + 1)));
        mix.next();
        return mix.next();
    }

  private:
    std::uint64_t state_;
};

}  // namespace qanno
