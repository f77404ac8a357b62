#pragma once

// Text gyro logs: one `timestamp_ns wx wy wz` sample per line (rad/s),
// `#` starts a comment, and an optional `# clock: <tag>` line names the
// clock domain.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gyroflow/synthetic.hpp"

namespace gyroflow {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t b = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > b) out.push_back(s.substr(b, i - b));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), out);
    return ec == std::errc{} && ptr == tok.data() + tok.size();
}

} // namespace detail

inline GyroLog parse_gyro_log(std::istream& is) {
    GyroLog log;
    log.clock.clear();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) {
            const std::string_view comment = detail::trim(body.substr(hash + 1));
            if (comment.rfind("clock:", 0) == 0 && detail::trim(body.substr(0, hash)).empty())
                log.clock = std::string(detail::trim(comment.substr(6)));
            body = body.substr(0, hash);
        }
        body = detail::trim(body);
        if (body.empty()) continue;
        const auto tok = detail::split_ws(body);
        if (tok.size() != 4)
            throw ParseError("expected 'timestamp_ns wx wy wz', got " + std::to_string(tok.size()) + " fields", lineno);
        GyroSample s;
        if (!detail::parse_number(tok[0], s.timestamp_ns))
            throw ParseError("bad timestamp '" + std::string(tok[0]) + "'", lineno);
        for (int k = 0; k < 3; ++k) {
            double v = 0.0;
            if (!detail::parse_number(tok[static_cast<std::size_t>(k) + 1], v) || !std::isfinite(v))
                throw ParseError("bad angular rate '" + std::string(tok[static_cast<std::size_t>(k) + 1]) + "'",
                                 lineno);
            s.omega[k] = v;
        }
        if (!log.samples.empty() && s.timestamp_ns <= log.samples.back().timestamp_ns)
            throw ValidationError("line " + std::to_string(lineno) + ": timestamp " +
                                  std::to_string(s.timestamp_ns) + " not after previous " +
                                  std::to_string(log.samples.back().timestamp_ns));
        log.samples.push_back(s);
    }
    if (is.bad()) throw IoError("gyro log: stream read failed");
    log.validate();
    return log;
}

inline GyroLog parse_gyro_log(const std::string& text) {
    std::istringstream is(text);
    return parse_gyro_log(is);
}

//! %.17g keeps every double exact through a parse
inline void write_gyro_log(std::ostream& os, const GyroLog& log) {
    if (!log.clock.empty()) os << "# clock: " << log.clock << '\n';
    char buf[128];
    for (const auto& s : log.samples) {
        std::snprintf(buf, sizeof buf, "%lld %.17g %.17g %.17g\n", static_cast<long long>(s.timestamp_ns),
                      s.omega.x(), s.omega.y(), s.omega.z());
        os << buf;
    }
    if (!os) throw IoError("gyro log: stream write failed");
}

inline std::string format_gyro_log(const GyroLog& log) {
    std::ostringstream os;
    write_gyro_log(os, log);
    return std::move(os).str();
}

inline GyroLog read_gyro_log_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open gyro log '" + path + "'");
    try {
        return parse_gyro_log(is);
    } catch (const ParseError& e) {
        throw ParseError(path, e);
    }
}

inline void write_gyro_log_file(const std::string& path, const GyroLog& log) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_gyro_log(os, log);
}

} // namespace gyroflow
