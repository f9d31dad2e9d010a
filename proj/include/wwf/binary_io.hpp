#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace wwf {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Little-endian helpers; the supported targets are all little-endian hosts.
template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw FormatError("unexpected end of file");
    return value;
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0) {
        throw FormatError(what + ": bad magic, expected '" + std::string(magic, 4) + "'");
    }
}

}  // namespace wwf
