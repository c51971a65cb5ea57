#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dflx {

using std::int64_t;
using std::uint32_t;
using std::uint64_t;

// Base error for anything the library can reject at runtime.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad file contents, unreadable paths, format violations.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Network graphs or configurations that fail validation.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// Floor division/modulo: result of mod is always in [0, n) for n > 0.
// Camera pans left/up produce negative tile coordinates, so the wrap
// must be the mathematical one, not C++'s truncating remainder.
inline int64_t floor_div(int64_t a, int64_t n) {
    int64_t q = a / n;
    if ((a % n != 0) && ((a < 0) != (n < 0))) --q;
    return q;
}

inline int64_t floor_mod(int64_t a, int64_t n) {
    int64_t r = a % n;
    if (r != 0 && ((r < 0) != (n < 0))) r += n;
    return r;
}

inline int64_t ceil_div(int64_t a, int64_t n) { return -floor_div(-a, n); }

}  // namespace dflx
