#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace speechshape {

/// Decode UTF-8 into codepoints. Invalid bytes pass through as single
/// codepoints so malformed input never throws here.
std::vector<std::uint32_t> utf8_decode(const std::string& text);
std::string utf8_encode(const std::vector<std::uint32_t>& cps);
std::string utf8_encode_one(std::uint32_t cp);

bool is_space_cp(std::uint32_t cp);
bool is_punct_cp(std::uint32_t cp);
/// Sentence-final markers: . ! ? and their fullwidth/CJK forms.
bool is_sentence_final_cp(std::uint32_t cp);
/// Clause separators usable as fallback split points: , ; and CJK forms.
bool is_clause_comma_cp(std::uint32_t cp);

/// Matching normalization: drop whitespace and punctuation, lowercase ASCII.
/// Inputs are expected to be NFC-normalized already.
std::string normalize_for_match(const std::string& text);

} // namespace speechshape
