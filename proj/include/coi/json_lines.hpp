#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/error.hpp"

namespace coi {

/// Calls `fn(object, line_number)` for every non-blank line of a JSON Lines file.
inline void for_each_json_line(const std::string& path,
                               const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
        }
        fn(j, lineno);
    }
}

template <typename T>
std::vector<T> read_json_lines(const std::string& path) {
    std::vector<T> out;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
        try {
            out.push_back(j.get<T>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        }
    });
    return out;
}

/// One compact object per line, sorted keys, trailing newline.
template <typename Range>
std::string to_json_lines(const Range& items) {
    std::string out;
    for (const auto& item : items) {
        out += nlohmann::json(item).dump();
        out.push_back('\n');
    }
    return out;
}

template <typename Range>
void write_json_lines(const std::string& path, const Range& items) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << to_json_lines(items);
}

}  // namespace coi
