#include "qtype/qparse.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <string>

namespace qtype::qparse {

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_blank_byte(char c) { return c == ' ' || c == '\t'; }

// ``` ... ``` regions; markers inside them are ignored.
std::vector<Span> fence_spans(std::string_view text) {
    std::vector<std::size_t> fences;
    for (std::size_t i = 0; i + 2 < text.size(); ++i) {
        if (text[i] == '`' && text[i + 1] == '`' && text[i + 2] == '`') {
            fences.push_back(i);
            i += 2;
        }
    }
    std::vector<Span> spans;
    for (std::size_t k = 0; k + 1 < fences.size(); k += 2) {
        spans.push_back({fences[k], fences[k + 1] + 3});
    }
    return spans;
}

bool inside_any(const std::vector<Span>& spans, std::size_t pos) {
    for (const Span& s : spans) {
        if (pos >= s.begin && pos < s.end) return true;
    }
    return false;
}

// Line start, allowing indentation.
bool at_line_start(std::string_view text, std::size_t pos) {
    while (pos > 0 && is_blank_byte(text[pos - 1])) --pos;
    return pos == 0 || text[pos - 1] == '\n';
}

// Line start, or whitespace preceded by clause punctuation, or a 2+ space gap.
// Suppresses mid-sentence initials ("A. Smith") at the candidate level.
bool at_clause_start(std::string_view text, std::size_t pos) {
    if (at_line_start(text, pos)) return true;
    if (pos >= 2 && text[pos - 1] == ' ' && text[pos - 2] == ' ') return true;
    std::size_t i = pos;
    bool saw_space = false;
    while (i > 0 && is_blank_byte(text[i - 1])) {
        --i;
        saw_space = true;
    }
    if (!saw_space || i == 0) return false;
    char c = text[i - 1];
    return c == '.' || c == '?' || c == '!' || c == ';' || c == ':';
}

bool after_space_or_start(std::string_view text, std::size_t pos) {
    return pos == 0 || is_ascii_space(text[pos - 1]);
}

// The marker must introduce option text: a blank, then some content.
bool introduces_content(std::string_view text, std::size_t marker_end) {
    if (marker_end >= text.size() || !is_blank_byte(text[marker_end])) return false;
    for (std::size_t i = marker_end; i < text.size(); ++i) {
        if (!is_ascii_space(text[i])) return true;
    }
    return false;
}

int roman_value(std::string_view s) {
    auto digit = [](char c) -> int {
        switch (c) {
            case 'i': case 'I': return 1;
            case 'v': case 'V': return 5;
            case 'x': case 'X': return 10;
            case 'l': case 'L': return 50;
            case 'c': case 'C': return 100;
            case 'd': case 'D': return 500;
            case 'm': case 'M': return 1000;
            default: return 0;
        }
    };
    int total = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        int v = digit(s[i]);
        if (v == 0) return 0;
        if (i + 1 < s.size() && digit(s[i + 1]) > v) {
            total -= v;
        } else {
            total += v;
        }
    }
    return total;
}

struct Candidate {
    std::size_t pos = 0;         // marker start
    std::size_t marker_end = 0;  // one past the marker characters
    int ordinal = 0;
};

std::vector<Candidate> scan_letter_dot(std::string_view text) {
    std::vector<Candidate> out;
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        char c = text[i];
        bool upper = c >= 'A' && c <= 'Z';
        bool lower = c >= 'a' && c <= 'z';
        if (!upper && !lower) continue;
        if (text[i + 1] != '.') continue;
        if (!at_clause_start(text, i)) continue;
        if (!introduces_content(text, i + 2)) continue;
        int ord = upper ? c - 'A' + 1 : c - 'a' + 1;
        out.push_back({i, i + 2, ord});
    }
    return out;
}

// Uppercase only: lowercase "(a)" / "a)" sequences are sub-part markers and
// belong to detect_parts.
std::vector<Candidate> scan_letter_paren(std::string_view text) {
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(' && i + 2 < text.size()) {
            char c = text[i + 1];
            if (c >= 'A' && c <= 'Z' && text[i + 2] == ')' && after_space_or_start(text, i) &&
                introduces_content(text, i + 3)) {
                out.push_back({i, i + 3, c - 'A' + 1});
                continue;
            }
        }
        char c = text[i];
        if (c >= 'A' && c <= 'Z' && i + 1 < text.size() && text[i + 1] == ')' &&
            after_space_or_start(text, i) && introduces_content(text, i + 2)) {
            out.push_back({i, i + 2, c - 'A' + 1});
        }
    }
    return out;
}

std::vector<Candidate> scan_number_dot(std::string_view text) {
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!(text[i] >= '0' && text[i] <= '9')) continue;
        if (!at_clause_start(text, i)) continue;
        std::size_t j = i;
        while (j < text.size() && text[j] >= '0' && text[j] <= '9' && j - i < 2) ++j;
        if (j >= text.size() || text[j] != '.') continue;
        if (!introduces_content(text, j + 1)) continue;
        int value = std::stoi(std::string(text.substr(i, j - i)));
        if (value >= 1 && value <= 99) out.push_back({i, j + 1, value});
        i = j;
    }
    return out;
}

std::vector<Candidate> scan_number_paren(std::string_view text) {
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        std::size_t start = i;
        std::size_t d = i;
        if (text[i] == '(') d = i + 1;
        std::size_t j = d;
        while (j < text.size() && text[j] >= '0' && text[j] <= '9' && j - d < 2) ++j;
        if (j == d || j >= text.size() || text[j] != ')') continue;
        if (!after_space_or_start(text, start)) continue;
        if (!introduces_content(text, j + 1)) continue;
        int value = std::stoi(std::string(text.substr(d, j - d)));
        if (value >= 1 && value <= 99) {
            out.push_back({start, j + 1, value});
            i = j;
        }
    }
    return out;
}

std::vector<Candidate> scan_roman_dot(std::string_view text) {
    std::vector<Candidate> out;
    auto is_roman_char = [](char c) {
        return std::strchr("ivxlcdm", c) != nullptr || std::strchr("IVXLCDM", c) != nullptr;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_roman_char(text[i])) continue;
        if (!at_clause_start(text, i)) continue;
        std::size_t j = i;
        bool upper = text[i] >= 'A' && text[i] <= 'Z';
        while (j < text.size() && is_roman_char(text[j]) &&
               ((text[j] >= 'A' && text[j] <= 'Z') == upper) && j - i < 6) {
            ++j;
        }
        if (j >= text.size() || text[j] != '.') {
            i = j;
            continue;
        }
        if (!introduces_content(text, j + 1)) {
            i = j;
            continue;
        }
        int value = roman_value(text.substr(i, j - i));
        if (value >= 1 && value <= 50) out.push_back({i, j + 1, value});
        i = j;
    }
    return out;
}

std::vector<Candidate> scan_bullets(std::string_view text) {
    std::vector<Candidate> out;
    int counter = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        bool bullet1 = text[i] == '-' || text[i] == '*';
        bool bullet3 = i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
                       static_cast<unsigned char>(text[i + 1]) == 0x80 &&
                       static_cast<unsigned char>(text[i + 2]) == 0xA2;  // U+2022
        if (!bullet1 && !bullet3) continue;
        if (!at_line_start(text, i)) continue;
        std::size_t end = i + (bullet3 ? 3 : 1);
        if (!introduces_content(text, end)) continue;
        out.push_back({i, end, ++counter});
    }
    return out;
}

struct Run {
    std::vector<Candidate> markers;
    bool sequential = false;
};

// Longest contiguous run of candidates with strictly increasing ordinals.
// Ordered styles must open at A/1/i, which suppresses initials ("J. K.
// Rowling") and stray coordinate pairs. Earlier runs win ties.
Run best_run(const std::vector<Candidate>& cands, bool require_start_one = true) {
    Run best;
    std::size_t i = 0;
    while (i < cands.size()) {
        std::size_t j = i + 1;
        while (j < cands.size() && cands[j].ordinal > cands[j - 1].ordinal) ++j;
        if ((!require_start_one || cands[i].ordinal == 1) && j - i > best.markers.size()) {
            best.markers.assign(cands.begin() + static_cast<std::ptrdiff_t>(i),
                                cands.begin() + static_cast<std::ptrdiff_t>(j));
        }
        i = j;
    }
    if (!best.markers.empty()) {
        best.sequential = best.markers.front().ordinal == 1;
        for (std::size_t k = 1; k < best.markers.size() && best.sequential; ++k) {
            if (best.markers[k].ordinal != best.markers[k - 1].ordinal + 1) best.sequential = false;
        }
    }
    return best;
}

std::size_t trim_end(std::string_view text, std::size_t begin, std::size_t end) {
    while (end > begin && is_ascii_space(text[end - 1])) --end;
    return end;
}

const std::array<const char*, 5> kInlineKeywords = {
    "options:", "choices:", "answer choices:", "answer options:", "possible answers:",
};

// "Options: .2 .4 2 4" — the tokens after the keyword, to end of line.
bool inline_keyword_options(std::string_view text, const std::string& lowered,
                            OptionListAnalysis& out) {
    std::size_t key_pos = std::string::npos;
    std::size_t key_len = 0;
    for (const char* kw : kInlineKeywords) {
        std::size_t p = lowered.find(kw);
        if (p != std::string::npos && (key_pos == std::string::npos || p < key_pos)) {
            key_pos = p;
            key_len = std::strlen(kw);
        }
    }
    if (key_pos == std::string::npos) return false;

    std::size_t line_end = text.find('\n', key_pos);
    if (line_end == std::string::npos) line_end = text.size();

    std::vector<Span> tokens;
    std::size_t i = key_pos + key_len;
    while (i < line_end) {
        // skip any whitespace byte; a stray '\r' must advance too
        while (i < line_end && is_ascii_space(text[i])) ++i;
        std::size_t start = i;
        while (i < line_end && !is_ascii_space(text[i])) ++i;
        if (i > start && i - start <= 30) tokens.push_back({start, i});
    }
    if (tokens.size() < 2) return false;

    out.option_count = static_cast<int>(tokens.size());
    out.style = OptionMarkerStyle::InlineKeyword;
    out.option_spans = tokens;
    out.markers_sequential = true;
    return true;
}

bool inline_token_ok(std::string_view tok) {
    if (tok.empty() || tok.size() > 20) return false;
    bool has_alnum = false;
    for (unsigned char c : tok) {
        if (is_word_byte(c)) {
            has_alnum = true;
        } else if (c != '.' && c != '%' && c != '/' && c != '$' && c != '-') {
            return false;
        }
    }
    return has_alnum;
}

// A trailing run of >= 3 short tokens separated by 2+ space gaps, e.g.
// "... (5 points)   Always   Sometimes   Never".
bool inline_widegap_options(std::string_view text, OptionListAnalysis& out) {
    std::size_t end = text.size();
    while (end > 0 && is_ascii_space(text[end - 1])) --end;
    if (end == 0) return false;
    std::size_t line_start = text.rfind('\n', end - 1);
    line_start = (line_start == std::string::npos) ? 0 : line_start + 1;

    struct Tok {
        Span span;
        std::size_t gap;  // spaces immediately before the token
    };
    std::vector<Tok> toks;
    std::size_t i = line_start;
    while (i < end) {
        std::size_t gap_start = i;
        while (i < end && is_ascii_space(text[i])) ++i;
        std::size_t start = i;
        while (i < end && !is_ascii_space(text[i])) ++i;
        if (i > start) toks.push_back({{start, i}, start - gap_start});
    }
    if (toks.empty()) return false;

    std::size_t first = toks.size();  // first token of the trailing run
    for (std::size_t k = toks.size(); k > 0; --k) {
        const Tok& t = toks[k - 1];
        if (!inline_token_ok(text.substr(t.span.begin, t.span.end - t.span.begin))) break;
        first = k - 1;
        if (t.gap < 2) break;  // run extends left only across wide gaps
    }
    if (first >= toks.size()) return false;
    // Every internal gap must be wide.
    for (std::size_t k = first + 1; k < toks.size(); ++k) {
        if (toks[k].gap < 2) return false;
    }
    std::size_t count = toks.size() - first;
    if (count < 3) return false;

    out.option_count = static_cast<int>(count);
    out.style = OptionMarkerStyle::InlineKeyword;
    out.markers_sequential = true;
    for (std::size_t k = first; k < toks.size(); ++k) out.option_spans.push_back(toks[k].span);
    return true;
}

struct OptionDetection {
    OptionListAnalysis analysis;
    std::vector<Span> marker_spans;
};

OptionDetection detect_options_impl(std::string_view text) {
    OptionDetection det;
    if (text.empty()) return det;

    const std::vector<Span> fences = fence_spans(text);
    auto filtered = [&](std::vector<Candidate> cands) {
        std::erase_if(cands, [&](const Candidate& c) { return inside_any(fences, c.pos); });
        return cands;
    };

    struct Scored {
        OptionMarkerStyle style;
        Run run;
    };
    std::vector<Scored> scans;
    scans.push_back({OptionMarkerStyle::LetterParen, best_run(filtered(scan_letter_paren(text)))});
    scans.push_back({OptionMarkerStyle::LetterDot, best_run(filtered(scan_letter_dot(text)))});
    scans.push_back({OptionMarkerStyle::NumberParen, best_run(filtered(scan_number_paren(text)))});
    scans.push_back({OptionMarkerStyle::NumberDot, best_run(filtered(scan_number_dot(text)))});
    scans.push_back({OptionMarkerStyle::RomanDot, best_run(filtered(scan_roman_dot(text)))});
    scans.push_back({OptionMarkerStyle::Bullet, best_run(filtered(scan_bullets(text)))});

    const Scored* winner = nullptr;
    for (const Scored& s : scans) {
        if (s.run.markers.size() >= 2 &&
            (winner == nullptr || s.run.markers.size() > winner->run.markers.size())) {
            winner = &s;
        }
    }

    if (winner != nullptr) {
        const auto& markers = winner->run.markers;
        det.analysis.option_count = static_cast<int>(markers.size());
        det.analysis.style = winner->style;
        det.analysis.markers_sequential = winner->run.sequential;
        for (std::size_t k = 0; k < markers.size(); ++k) {
            std::size_t begin = markers[k].pos;
            std::size_t end = (k + 1 < markers.size()) ? markers[k + 1].pos : text.size();
            det.analysis.option_spans.push_back({begin, trim_end(text, begin, end)});
            det.marker_spans.push_back({markers[k].pos, markers[k].marker_end});
        }
        return det;
    }

    const std::string lowered = to_lower(text);
    if (inline_keyword_options(text, lowered, det.analysis) ||
        inline_widegap_options(text, det.analysis)) {
        det.marker_spans = det.analysis.option_spans;
    }
    return det;
}

int detect_parts_impl(std::string_view text, const std::vector<Span>& option_markers) {
    if (text.empty()) return 0;
    const std::vector<Span> fences = fence_spans(text);

    auto excluded = [&](std::size_t pos, std::size_t end) {
        if (inside_any(fences, pos)) return true;
        for (const Span& m : option_markers) {
            if (pos < m.end && end > m.begin) return true;
        }
        return false;
    };

    // Lowercase letters and lowercase romans only; parts are "(a)", "a)", "(i)".
    auto scan = [&](bool roman) {
        std::vector<Candidate> out;
        for (std::size_t i = 0; i < text.size(); ++i) {
            std::size_t start = i;
            std::size_t d = i;
            bool paren = text[i] == '(';
            if (paren) d = i + 1;
            std::size_t j = d;
            if (roman) {
                while (j < text.size() && (text[j] == 'i' || text[j] == 'v' || text[j] == 'x') &&
                       j - d < 4) {
                    ++j;
                }
            } else {
                if (j < text.size() && text[j] >= 'a' && text[j] <= 'z') ++j;
            }
            if (j == d || j >= text.size() || text[j] != ')') continue;
            if (!at_clause_start(text, start)) continue;
            if (!introduces_content(text, j + 1)) continue;
            if (excluded(start, j + 1)) continue;
            int ord = roman ? roman_value(text.substr(d, j - d)) : text[d] - 'a' + 1;
            if (ord >= 1) {
                out.push_back({start, j + 1, ord});
                i = j;
            }
        }
        return out;
    };

    // Gap-free from 1 ("a" / "i"), at least two parts.
    auto best_count = [](const std::vector<Candidate>& cands) {
        std::size_t best = 0;
        std::size_t i = 0;
        while (i < cands.size()) {
            if (cands[i].ordinal != 1) {
                ++i;
                continue;
            }
            std::size_t j = i + 1;
            while (j < cands.size() && cands[j].ordinal == cands[j - 1].ordinal + 1) ++j;
            best = std::max(best, j - i);
            i = j;
        }
        return best >= 2 ? static_cast<int>(best) : 0;
    };

    std::vector<Candidate> letters = scan(false);
    std::vector<Candidate> romans = scan(true);
    // "a)" and roman "i)" overlap on 'i','v','x'; prefer the longer reading.
    return std::max(best_count(letters), best_count(romans));
}

const std::array<const char*, 16> kCodeMarkers = {
    "```",      "def ",        "#include",   "int main",     "printf(",     "console.log",
    "System.out", "function(", "function (", "print(",       "<?php",       "import java",
    "CREATE TABLE", "INSERT INTO", "public static", "lambda ",
};

const std::array<const char*, 7> kTablePhrases = {
    "complete the table", "fill in the table", "fill out the table", "the table below",
    "following table",    "fill out the form", "complete the form",
};

const std::array<const char*, 5> kMathPhrases = {
    "solve for", "calculate", "compute", "how many", "how much",
};

const std::array<const char*, 7> kMathSymbols = {
    "=", "∑", "√", "∫", "%", "≤", "≥",
};

bool detect_code(std::string_view text) {
    std::string s(text);
    for (const char* m : kCodeMarkers) {
        if (s.find(m) != std::string::npos) return true;
    }
    // SQL requires both keywords so all-caps prose doesn't trip it.
    if (s.find("SELECT ") != std::string::npos && s.find(" FROM ") != std::string::npos) {
        return true;
    }
    return false;
}

bool detect_table(std::string_view text, const std::string& lowered) {
    for (const char* m : kTablePhrases) {
        if (lowered.find(m) != std::string::npos) return true;
    }
    std::size_t line_start = 0;
    while (line_start < text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        int pipes = 0;
        for (std::size_t i = line_start; i < line_end; ++i) {
            if (text[i] == '|') ++pipes;
        }
        if (pipes >= 2) return true;
        if (line_end - line_start >= 3 && text.substr(line_start, 3) == "+--") return true;
        line_start = line_end + 1;
    }
    return false;
}

bool detect_math(std::string_view text, const std::string& lowered) {
    for (const char* m : kMathSymbols) {
        if (text.find(m) != std::string_view::npos) return true;
    }
    for (const char* m : kMathPhrases) {
        if (lowered.find(m) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

const char* to_string(OptionMarkerStyle s) {
    switch (s) {
        case OptionMarkerStyle::LetterDot: return "LetterDot";
        case OptionMarkerStyle::LetterParen: return "LetterParen";
        case OptionMarkerStyle::NumberDot: return "NumberDot";
        case OptionMarkerStyle::NumberParen: return "NumberParen";
        case OptionMarkerStyle::RomanDot: return "RomanDot";
        case OptionMarkerStyle::Bullet: return "Bullet";
        case OptionMarkerStyle::InlineKeyword: return "InlineKeyword";
    }
    return "?";
}

int style_code(const std::optional<OptionMarkerStyle>& s) {
    return s ? static_cast<int>(*s) + 1 : 0;
}

std::vector<Span> tokenize(std::string_view text) {
    std::vector<Span> out;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_ascii_space(static_cast<char>(c))) {
            ++i;
            continue;
        }
        if (is_word_byte(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            out.push_back({i, j});
            i = j;
        } else {
            out.push_back({i, i + 1});
            ++i;
        }
    }
    return out;
}

OptionListAnalysis detect_option_list(std::string_view text) {
    return detect_options_impl(text).analysis;
}

int detect_blanks(std::string_view text) {
    int blanks = 0;

    auto prev_nonspace = [&](std::size_t pos) -> char {
        while (pos > 0) {
            --pos;
            if (!is_ascii_space(text[pos])) return text[pos];
        }
        return '\0';
    };
    auto next_nonspace = [&](std::size_t pos) -> char {
        while (pos < text.size()) {
            if (!is_ascii_space(text[pos])) return text[pos];
            ++pos;
        }
        return '\0';
    };

    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '_') {
            std::size_t j = i;
            while (j < text.size() && text[j] == '_') ++j;
            if (j - i >= 2) ++blanks;
            i = j;
            continue;
        }
        bool ellipsis = false;
        std::size_t run_end = i;
        if (text[i] == '.') {
            std::size_t j = i;
            while (j < text.size() && text[j] == '.') ++j;
            if (j - i >= 3) {
                ellipsis = true;
                run_end = j;
            } else {
                i = j;
                continue;
            }
        } else if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
                   static_cast<unsigned char>(text[i + 1]) == 0x80 &&
                   static_cast<unsigned char>(text[i + 2]) == 0xA6) {  // U+2026
            ellipsis = true;
            run_end = i + 3;
        }
        if (ellipsis) {
            // Intra-sentence only: word context before and after. A trailing
            // ellipsis is truncation, not a blank.
            char before = prev_nonspace(i);
            char after = next_nonspace(run_end);
            bool before_ok = is_word_byte(static_cast<unsigned char>(before)) || before == ',' ||
                             before == ';' || before == ':';
            bool after_ok = is_word_byte(static_cast<unsigned char>(after));
            if (before_ok && after_ok) ++blanks;
            i = run_end;
            continue;
        }
        ++i;
    }

    const std::string lowered = to_lower(text);
    std::size_t pos = 0;
    while ((pos = lowered.find("[blank]", pos)) != std::string::npos) {
        ++blanks;
        pos += 7;
    }
    return blanks;
}

int detect_parts(std::string_view text) {
    return detect_parts_impl(text, detect_options_impl(text).marker_spans);
}

bool detect_tf_pair(std::string_view text) {
    std::vector<Span> spans = tokenize(text);
    std::vector<std::string> toks;
    toks.reserve(spans.size());
    for (const Span& s : spans) toks.push_back(to_lower(text.substr(s.begin, s.end - s.begin)));

    auto is_filler = [](const std::string& t) {
        return t == "or" || t == "/" || t == "," || t == "(" || t == ")" || t == "-" || t == "|";
    };
    auto pair_at = [&](std::size_t i, const char* a, const char* b) {
        if (toks[i] != a) return false;
        std::size_t j = i + 1;
        int fillers = 0;
        while (j < toks.size() && fillers < 3 && is_filler(toks[j])) {
            ++j;
            ++fillers;
        }
        return j < toks.size() && toks[j] == b;
    };

    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (pair_at(i, "true", "false") || pair_at(i, "false", "true") ||
            pair_at(i, "yes", "no") || pair_at(i, "no", "yes")) {
            return true;
        }
        // "T/F" only in the slash form; bare t ... f is too noisy.
        if (i + 2 < toks.size() && toks[i] == "t" && toks[i + 1] == "/" && toks[i + 2] == "f") {
            return true;
        }
    }
    return false;
}

StructuralAnalysis analyze(std::string_view text) {
    StructuralAnalysis a;
    if (text.empty()) return a;

    OptionDetection det = detect_options_impl(text);
    a.options = det.analysis;
    a.blank_count = detect_blanks(text);
    a.part_count = detect_parts_impl(text, det.marker_spans);
    a.has_tf_pair = detect_tf_pair(text);
    a.token_count = static_cast<int>(tokenize(text).size());

    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        for (std::size_t i = line_start; i < line_end; ++i) {
            if (!is_ascii_space(text[i])) {
                ++a.line_count;
                break;
            }
        }
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }

    const std::string lowered = to_lower(text);
    a.has_code_indicator = detect_code(text);
    a.has_table_indicator = detect_table(text, lowered);
    a.has_math_indicator = detect_math(text, lowered);

    std::size_t end = text.size();
    while (end > 0 && is_ascii_space(text[end - 1])) --end;
    if (end > 0) {
        a.ends_with_question_mark = text[end - 1] == '?';
        if (end >= 3 && text.substr(end - 3, 3) == "...") a.has_truncation = true;
        if (end >= 3 && static_cast<unsigned char>(text[end - 3]) == 0xE2 &&
            static_cast<unsigned char>(text[end - 2]) == 0x80 &&
            static_cast<unsigned char>(text[end - 1]) == 0xA6) {
            a.has_truncation = true;
        }
    }
    return a;
}

nlohmann::json analysis_to_json(const StructuralAnalysis& a) {
    nlohmann::json options;
    options["option_count"] = a.options.option_count;
    options["style"] =
        a.options.style ? nlohmann::json(to_string(*a.options.style)) : nlohmann::json(nullptr);
    nlohmann::json spans = nlohmann::json::array();
    for (const Span& s : a.options.option_spans) {
        spans.push_back(nlohmann::json::array({s.begin, s.end}));
    }
    options["option_spans"] = spans;
    options["markers_sequential"] = a.options.markers_sequential;

    nlohmann::json j;
    j["options"] = options;
    j["blank_count"] = a.blank_count;
    j["part_count"] = a.part_count;
    j["has_tf_pair"] = a.has_tf_pair;
    j["line_count"] = a.line_count;
    j["token_count"] = a.token_count;
    j["has_code_indicator"] = a.has_code_indicator;
    j["has_table_indicator"] = a.has_table_indicator;
    j["has_math_indicator"] = a.has_math_indicator;
    j["ends_with_question_mark"] = a.ends_with_question_mark;
    j["has_truncation"] = a.has_truncation;
    return j;
}

}  // namespace qtype::qparse
