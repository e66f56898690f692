#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace hilange {

// Round-trip-exact decimal form, shared by every emitted file.
inline std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

// HILANGE_THREADS caps worker count; absent or malformed means serial.
inline size_t thread_cap() {
    const char* env = std::getenv("HILANGE_THREADS");
    if (!env) return 1;
    long v = std::strtol(env, nullptr, 10);
    return v < 1 ? 1 : (size_t)v;
}

struct Fnv1a {
    uint64_t h = 1469598103934665603ULL;
    void bytes(const void* p, size_t n) {
        const auto* b = (const unsigned char*)p;
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    }
    void str(const std::string& s) { bytes(s.data(), s.size() + 1); }
    void num(double v) { bytes(&v, sizeof v); }
    std::string hex() const {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
        return buf;
    }
};

}  // namespace detail
}  // namespace hilange
