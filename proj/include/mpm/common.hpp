#pragma once

#include <Eigen/Dense>

#include <array>
#include <type_traits>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpm {

template <class T, int dim>
using Vec = Eigen::Matrix<T, dim, 1>;

template <class T, int dim>
using Mat = Eigen::Matrix<T, dim, dim>;

using Index = std::int64_t;

// Errors map onto CLI exit codes: usage = 1 (handled by the CLI parser),
// validation = 2, numerical failure = 3.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfDomainError : NumericalError {
    Index particle;
    OutOfDomainError(Index p, const std::string& what)
        : NumericalError(what), particle(p) {}
};

// FNV-1a over raw bytes. Used for state hashing (checkpoint consistency
// checks, bit-identity tests) and for deriving purpose-tagged RNG seeds.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull)
{
    return fnv1a(s.data(), s.size(), h);
}

template <class T>
std::uint64_t hash_span(const T* data, std::size_t n, std::uint64_t h)
{
    return fnv1a(static_cast<const void*>(data), n * sizeof(T), h);
}

template <class T>
std::uint64_t hash_vector(const std::vector<T>& v, std::uint64_t h)
{
    return v.empty() ? h : fnv1a(static_cast<const void*>(v.data()), v.size() * sizeof(T), h);
}

// Order-sensitive hash of discrete branch decisions (contact gates, stick
// caps, plasticity zones) taken during a forward run. Finite-difference
// gradient checks probe it to reject perturbations that straddle a branch
// boundary.
struct BranchLog {
    std::uint64_t value = 0xcbf29ce484222325ull;
    void push(std::uint32_t v)
    {
        value ^= v;
        value *= 0x100000001b3ull;
    }
};

// One user-facing seed, split internally by purpose so e.g. particle
// subsampling and MLP initialization draw from independent streams.
inline std::uint64_t seed_for(std::uint64_t seed, const std::string& tag)
{
    std::uint64_t h = fnv1a(tag);
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

} // namespace mpm
