#ifndef HCSPMM_TYPES_HPP
#define HCSPMM_TYPES_HPP

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace hcspmm {

using index_t = std::int64_t;

/// Row height of a window and the tile shape consumed by the tile executor.
inline constexpr index_t kWindowHeight = 16;
inline constexpr index_t kTileCols = 8;
inline constexpr index_t kDimTile = 16;

#ifdef NDEBUG
inline constexpr bool kDebugBuild = false;
#else
inline constexpr bool kDebugBuild = true;
#endif

// Malformed or inconsistent user input (files, arguments, shapes).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A structural invariant was violated inside the library.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InputError(what);
}

inline void ensure(bool ok, const std::string& what) {
    if (!ok) throw InvariantError(what);
}

/// Round-trip decimal form (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }

}  // namespace detail
}  // namespace hcspmm

#endif
