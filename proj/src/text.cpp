#include "lipfem/text.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "lipfem/error.hpp"

namespace lipfem {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::OutsideDomain: return "point-outside-domain";
        case ErrorKind::UnsupportedDegree: return "unsupported-degree";
        case ErrorKind::Ellipticity: return "ellipticity-violation";
        case ErrorKind::Solver: return "solver-failure";
        case ErrorKind::MeshTooCoarse: return "mesh-too-coarse";
        case ErrorKind::Refinement: return "refinement-relation";
        case ErrorKind::GridMismatch: return "grid-mismatch";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
    text = trim(text);
    if (text == "inf" || text == "+inf" || text == "infinity") return INFINITY;
    if (text == "-inf") return -INFINITY;
    if (text == "nan") return NAN;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        fail(ErrorKind::InvalidArgument, "not a number: '" + std::string(text) + "'");
    return value;
}

long long parse_int(std::string_view text) {
    text = trim(text);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        fail(ErrorKind::InvalidArgument, "not an integer: '" + std::string(text) + "'");
    return value;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string hex64(unsigned long long value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", value);
    return buf;
}

}  // namespace lipfem
