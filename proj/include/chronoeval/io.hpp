#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "chronoeval/errors.hpp"

namespace chronoeval::io {

using json = nlohmann::json;

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Write via temp file + rename so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
    const auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open for writing: " + tmp.string());
        out.write(content.data(),
                  static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// One JSON value per non-blank line.
inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) +
                        ": bad JSON line: " + e.what());
        }
    }
    return out;
}

inline void write_jsonl(const std::filesystem::path& path,
                        const std::vector<json>& rows) {
    std::string buf;
    for (const auto& row : rows) {
        buf += row.dump();
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

// Splits on runs of whitespace. The length statistic used in filter
// reports and length-controlled win rates.
inline std::size_t whitespace_token_count(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                        c == '\f' || c == '\v';
        if (!ws && !in_token) ++n;
        in_token = !ws;
    }
    return n;
}

}  // namespace chronoeval::io
