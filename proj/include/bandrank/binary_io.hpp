#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "bandrank/errors.hpp"

namespace bandrank::io {

namespace detail {

template <typename T>
T to_little(T v) noexcept {
    if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
        return v;
    } else {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        std::memcpy(&v, bytes, sizeof(T));
        return v;
    }
}

}  // namespace detail

/// Little-endian writer for the binary model/weight containers.
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T v) {
        v = detail::to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void put_doubles(const std::vector<double>& values) {
        put<std::uint64_t>(values.size());
        for (double v : values) put(v);
    }

    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void expect_magic(std::string_view tag) {
        std::string got(tag.size(), '\0');
        in_.read(got.data(), static_cast<std::streamsize>(got.size()));
        if (!in_ || got != tag) throw FormatError("bad magic: expected '" + std::string(tag) + "'");
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw CorruptDataError("unexpected end of binary stream");
        return detail::to_little(v);
    }

    std::vector<double> get_doubles(std::uint64_t max_count = 1ULL << 32) {
        const auto n = get<std::uint64_t>();
        if (n > max_count) throw CorruptDataError("implausible array length in binary stream");
        std::vector<double> values(n);
        for (auto& v : values) v = get<double>();
        return values;
    }

    std::string get_string() {
        const auto n = get<std::uint32_t>();
        if (n > (1U << 20)) throw CorruptDataError("implausible string length in binary stream");
        std::string s(n, '\0');
        in_.read(s.data(), n);
        if (!in_) throw CorruptDataError("unexpected end of binary stream");
        return s;
    }

private:
    std::istream& in_;
};

}  // namespace bandrank::io
