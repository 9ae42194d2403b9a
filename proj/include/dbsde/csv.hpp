#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"

namespace dbsde::csv {

/// Shortest decimal text that round-trips to the same double.
inline std::string format(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigurationError("not a number: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(sep, pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

/// Row-oriented writer; every cell is either a string or a double.
class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open '" + path + "' for writing");
    }

    void header(std::span<const std::string> names) {
        for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
        out_ << '\n';
    }

    void header(std::initializer_list<std::string> names) {
        std::vector<std::string> v(names);
        header(std::span<const std::string>(v));
    }

    void row(std::span<const double> cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << format(cells[i]);
        out_ << '\n';
    }

    void row(std::initializer_list<double> cells) {
        std::vector<double> v(cells);
        row(std::span<const double>(v));
    }

    void raw(const std::string& line) { out_ << line << '\n'; }

private:
    std::ofstream out_;
};

}  // namespace dbsde::csv
