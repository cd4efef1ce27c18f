#include "rav/util.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rav/errors.hpp"

namespace rav::util {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_any(std::string_view s, std::string_view delims) {
    std::vector<std::string> out;
    std::string current;
    for (char c : s) {
        if (delims.find(c) != std::string_view::npos) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open for reading: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::IoError, "cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) raise(Errc::IoError, "write failed: " + path);
}

namespace {

const std::array<std::string, 12> kMonths = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

bool parse_int(std::string_view s, int& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool valid_ymd(int y, int m, int d) {
    return y >= 1 && y <= 9999 && m >= 1 && m <= 12 && d >= 1 && d <= 31;
}

std::string format_ymd(int y, int m, int d) {
    char buf[11];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return std::string(buf);
}

}  // namespace

std::optional<std::string> parse_date_iso(std::string_view raw) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;

    // YYYY-MM-DD (optionally with a trailing time part we ignore)
    if (s.size() >= 10 && s[4] == '-' && s[7] == '-') {
        int y, m, d;
        if (parse_int(std::string_view(s).substr(0, 4), y) &&
            parse_int(std::string_view(s).substr(5, 2), m) &&
            parse_int(std::string_view(s).substr(8, 2), d) && valid_ymd(y, m, d)) {
            return format_ymd(y, m, d);
        }
    }

    // M/D/YYYY
    {
        auto parts = split(s, '/');
        if (parts.size() == 3) {
            int m, d, y;
            if (parse_int(parts[0], m) && parse_int(parts[1], d) && parse_int(parts[2], y) &&
                valid_ymd(y, m, d)) {
                return format_ymd(y, m, d);
            }
        }
    }

    // "Month D, YYYY"
    {
        std::string l = lower(s);
        for (std::size_t mi = 0; mi < kMonths.size(); ++mi) {
            const std::string& mon = kMonths[mi];
            if (l.rfind(mon, 0) != 0) continue;
            std::string rest = trim(l.substr(mon.size()));
            auto comma = rest.find(',');
            if (comma == std::string::npos) break;
            int d, y;
            if (parse_int(trim(rest.substr(0, comma)), d) &&
                parse_int(trim(rest.substr(comma + 1)), y) &&
                valid_ymd(y, static_cast<int>(mi) + 1, d)) {
                return format_ymd(y, static_cast<int>(mi) + 1, d);
            }
            break;
        }
    }

    return std::nullopt;
}

std::int64_t steady_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace rav::util
