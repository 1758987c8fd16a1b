#include "speechshape/text.hpp"

#include <algorithm>

namespace speechshape {

std::vector<std::uint32_t> utf8_decode(const std::string& text) {
    std::vector<std::uint32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        std::uint32_t cp = c;
        std::size_t extra = 0;
        if (c >= 0xF0) { cp = c & 0x07; extra = 3; }
        else if (c >= 0xE0) { cp = c & 0x0F; extra = 2; }
        else if (c >= 0xC0) { cp = c & 0x1F; extra = 1; }
        if (i + extra >= text.size() && extra > 0) { out.push_back(c); ++i; continue; }
        bool valid = true;
        for (std::size_t k = 1; k <= extra; ++k) {
            unsigned char cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) { valid = false; break; }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!valid) { out.push_back(c); ++i; continue; }
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

std::string utf8_encode_one(std::uint32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

std::string utf8_encode(const std::vector<std::uint32_t>& cps) {
    std::string out;
    for (auto cp : cps) out += utf8_encode_one(cp);
    return out;
}

bool is_space_cp(std::uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x3000 /* ideographic */;
}

bool is_sentence_final_cp(std::uint32_t cp) {
    return cp == '.' || cp == '!' || cp == '?' || cp == 0x3002 /* 。 */ ||
           cp == 0xFF01 /* ！ */ || cp == 0xFF1F /* ？ */;
}

bool is_clause_comma_cp(std::uint32_t cp) {
    return cp == ',' || cp == ';' || cp == 0xFF0C /* ， */ || cp == 0x3001 /* 、 */ ||
           cp == 0xFF1B /* ； */;
}

bool is_punct_cp(std::uint32_t cp) {
    if (is_sentence_final_cp(cp) || is_clause_comma_cp(cp)) return true;
    if (cp < 0x80) {
        char c = static_cast<char>(cp);
        return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
               (c >= '{' && c <= '~');
    }
    switch (cp) {
        case 0xFF1A: // ：
        case 0xFF08: // （
        case 0xFF09: // ）
        case 0x300A: // 《
        case 0x300B: // 》
        case 0x300C: // 「
        case 0x300D: // 」
        case 0x2018: case 0x2019: // ‘ ’
        case 0x201C: case 0x201D: // “ ”
        case 0x2026: // …
        case 0x2014: // —
        case 0x00B7: // ·
            return true;
        default:
            return false;
    }
}

std::string normalize_for_match(const std::string& text) {
    std::string out;
    for (auto cp : utf8_decode(text)) {
        if (is_space_cp(cp) || is_punct_cp(cp)) continue;
        if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
        out += utf8_encode_one(cp);
    }
    return out;
}

} // namespace speechshape
