#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qtype/core.hpp"

namespace qtype::qparse {

// Marker grammars recognized by the option-list detector. One style per
// detected list; when candidate styles compete, the longest sequence wins.
enum class OptionMarkerStyle {
    LetterDot,     // "A. text"
    LetterParen,   // "(A) text" or "A) text"
    NumberDot,     // "1. text"
    NumberParen,   // "(1) text" or "1) text"
    RomanDot,      // "i. text" / "II. text"
    Bullet,        // "- text", "* text", "• text" at line start
    InlineKeyword, // "Options: a b c" or a trailing wide-gap token run
};

const char* to_string(OptionMarkerStyle s);

// Numeric code used as a feature value: none=0, then 1..7 in enum order.
int style_code(const std::optional<OptionMarkerStyle>& s);

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
    bool operator==(const Span&) const = default;
};

struct OptionListAnalysis {
    int option_count = 0;
    std::optional<OptionMarkerStyle> style;
    std::vector<Span> option_spans;     // ascending, non-overlapping, start at markers
    bool markers_sequential = false;    // A,B,C... / 1,2,3... from the start, no gaps
};

struct StructuralAnalysis {
    OptionListAnalysis options;
    int blank_count = 0;
    int part_count = 0;                // sequential sub-part markers (a), (b), ...
    bool has_tf_pair = false;          // True/False or Yes/No as adjacent answer tokens
    int line_count = 0;                // non-blank lines
    int token_count = 0;
    bool has_code_indicator = false;
    bool has_table_indicator = false;
    bool has_math_indicator = false;
    bool ends_with_question_mark = false;
    bool has_truncation = false;       // text trails off with a sentence-final ellipsis
};

// Token = maximal run of letters/digits (bytes >= 0x80 count as letters so
// UTF-8 words stay whole) or a single punctuation byte. No linguistic
// tokenizer; deterministic by construction.
std::vector<Span> tokenize(std::string_view text);

OptionListAnalysis detect_option_list(std::string_view text);
int detect_blanks(std::string_view text);
int detect_parts(std::string_view text);
bool detect_tf_pair(std::string_view text);

StructuralAnalysis analyze(std::string_view text);
inline StructuralAnalysis analyze(const QuestionRecord& q) { return analyze(q.text); }

nlohmann::json analysis_to_json(const StructuralAnalysis& a);

}  // namespace qtype::qparse
