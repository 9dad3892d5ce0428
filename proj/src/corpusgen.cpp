#include "qtype/corpusgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "qtype/util.hpp"

namespace qtype::corpusgen {

namespace {

std::string pick(Rng& rng, const std::vector<std::string>& pool) {
    return pool[rng.next_index(pool.size())];
}

// Expand {slot} placeholders. num* slots become random integers; other slots
// draw from the filler pools, avoiding repeats within one stem where possible.
std::string expand(const std::string& stem, Rng& rng, const TemplateSpec& spec) {
    std::string out;
    std::set<std::string> used;
    std::size_t i = 0;
    while (i < stem.size()) {
        if (stem[i] != '{') {
            out.push_back(stem[i]);
            ++i;
            continue;
        }
        std::size_t close = stem.find('}', i);
        if (close == std::string::npos) {
            out.push_back(stem[i]);
            ++i;
            continue;
        }
        std::string slot = stem.substr(i + 1, close - i - 1);
        if (slot.rfind("num", 0) == 0) {
            out += std::to_string(rng.next_int(2, 49));
        } else {
            std::string key = slot;
            // trailing digits select the same pool: topic2 -> topic
            while (!key.empty() && key.back() >= '0' && key.back() <= '9') key.pop_back();
            auto it = spec.fillers.find(key);
            if (it == spec.fillers.end() || it->second.empty()) {
                throw Error("MalformedTemplate", "unknown filler slot '" + slot + "'");
            }
            std::string value = pick(rng, it->second);
            for (int attempt = 0; attempt < 3 && used.count(value); ++attempt) {
                value = pick(rng, it->second);
            }
            used.insert(value);
            out += value;
        }
        i = close + 1;
    }
    return out;
}

enum class OptionFlavor { words, numbers };

// Option block in one of the detectable marker styles; markerless when a
// noise op stripped the markers.
std::string option_block(Rng& rng, const TemplateSpec& spec, OptionFlavor flavor,
                         bool with_markers, bool add_answer_keyword) {
    int style = rng.next_int(0, 4);  // 0 dot, 1 paren, 2 number dot, 3 number paren, 4 inline
    int count = rng.next_int(4, 5);

    std::vector<std::string> options;
    std::set<std::string> used;
    for (int k = 0; k < count; ++k) {
        if (flavor == OptionFlavor::numbers) {
            options.push_back(std::to_string(rng.next_int(2, 99)));
        } else {
            const std::vector<std::string>& pool = spec.fillers.at("option_word");
            std::string value = pick(rng, pool);
            for (int attempt = 0; attempt < 4 && used.count(value); ++attempt) {
                value = pick(rng, pool);
            }
            used.insert(value);
            options.push_back(value);
        }
    }

    std::string out;
    if (style == 4) {
        // Inline keyword list stays on one line; keyword suffixes don't fit it.
        out = with_markers ? "\nOptions:" : "\n";
        for (const std::string& o : options) {
            out.push_back(' ');
            out += o;
        }
        return out;
    }
    if (add_answer_keyword) {
        const std::vector<std::string> closers = {"None of the above", "All of the above"};
        options.back() = closers[rng.next_index(closers.size())];
    }
    for (int k = 0; k < count; ++k) {
        out.push_back('\n');
        if (with_markers) {
            switch (style) {
                case 0: out += static_cast<char>('A' + k); out += ". "; break;
                case 1: out += "("; out += static_cast<char>('A' + k); out += ") "; break;
                case 2: out += std::to_string(k + 1); out += ". "; break;
                default: out += std::to_string(k + 1); out += ") "; break;
            }
        }
        out += options[static_cast<std::size_t>(k)];
    }
    return out;
}

std::string code_block(Rng& rng) {
    switch (rng.next_int(0, 2)) {
        case 0:
            return "\n```\ndef solve(items):\n    return items\n```";
        case 1:
            return "\n```\nint main() {\n    return 0;\n}\n```";
        default:
            return "\nSELECT name, total FROM orders WHERE total > 10;";
    }
}

std::string table_block(Rng& rng) {
    if (rng.bernoulli(0.5)) {
        return "\nYear | Value | Change\n20" + std::to_string(rng.next_int(10, 24)) + " | " +
               std::to_string(rng.next_int(10, 99)) + " | ?";
    }
    return "\nItem | Amount\nFirst | " + std::to_string(rng.next_int(10, 99)) + "\nSecond | ?";
}

struct Draft {
    std::string body;
    std::string decoration;  // option block or other appendix
    bool has_option_markers = false;
    LabelSet labels;
};

Draft make_draft(QuestionType cls, Rng& rng, const TemplateSpec& spec, bool markers) {
    const TypeTemplates& tt = spec.types[static_cast<std::size_t>(cls)];
    Draft d;
    d.labels.insert(cls);

    auto stem_of = [&](QuestionType t) {
        return expand(pick(rng, spec.types[static_cast<std::size_t>(t)].stems), rng, spec);
    };

    switch (cls) {
        case QuestionType::MCQ: {
            QuestionType co = QuestionType::MCQ;
            if (rng.bernoulli(tt.co_label_prob)) {
                const std::array<QuestionType, 4> pool = {QuestionType::CALC, QuestionType::FIB,
                                                          QuestionType::SA, QuestionType::COD};
                co = pool[rng.next_index(pool.size())];
            }
            OptionFlavor flavor = OptionFlavor::words;
            if (co == QuestionType::MCQ) {
                d.body = stem_of(QuestionType::MCQ);
            } else {
                d.body = stem_of(co);
                d.labels.insert(co);
                if (co == QuestionType::CALC) flavor = OptionFlavor::numbers;
                if (co == QuestionType::COD) d.body += code_block(rng);
            }
            d.decoration = option_block(rng, spec, flavor, markers, rng.bernoulli(0.3));
            d.has_option_markers = true;
            break;
        }
        case QuestionType::TCQ: {
            std::string statement;
            if (rng.bernoulli(tt.co_label_prob)) {
                int a = rng.next_int(2, 30);
                int b = rng.next_int(2, 30);
                statement = std::to_string(a) + " + " + std::to_string(b) + " = " +
                            std::to_string(a + b + (rng.bernoulli(0.5) ? 0 : 1));
                d.labels.insert(QuestionType::CALC);
            } else {
                statement = expand(pick(rng, spec.fillers.at("statement")), rng, spec);
            }
            d.body = expand(pick(rng, tt.stems), rng, spec);
            // stems carry a <statement> marker replaced here
            std::size_t pos = d.body.find("<statement>");
            if (pos != std::string::npos) {
                d.body.replace(pos, 11, statement);
            } else {
                d.body += " " + statement;
            }
            break;
        }
        case QuestionType::FIB: {
            if (rng.bernoulli(tt.co_label_prob)) {
                int a = rng.next_int(2, 30);
                int b = rng.next_int(2, 30);
                d.body = "Fill in the blank: " + std::to_string(a) + " + ____ = " +
                         std::to_string(a + b) + ".";
                d.labels.insert(QuestionType::CALC);
            } else {
                d.body = stem_of(QuestionType::FIB);
            }
            break;
        }
        case QuestionType::CALC: {
            if (rng.bernoulli(tt.co_label_prob)) {
                // multi-part: calculation then a sketch
                d.body = "(a) " + stem_of(QuestionType::CALC) + " (b) " +
                         stem_of(QuestionType::GR);
                d.labels.insert(QuestionType::GR);
            } else {
                d.body = stem_of(QuestionType::CALC);
            }
            break;
        }
        case QuestionType::COD:
            d.body = stem_of(QuestionType::COD);
            d.decoration = code_block(rng);
            break;
        case QuestionType::TBL:
            d.body = stem_of(QuestionType::TBL);
            d.decoration = table_block(rng);
            break;
        default:
            d.body = stem_of(cls);
            break;
    }
    return d;
}

}  // namespace

TemplateSpec load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open template file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("MalformedTemplate", std::string("invalid JSON: ") + e.what());
    }

    TemplateSpec spec;
    for (auto it = j.at("fillers").begin(); it != j.at("fillers").end(); ++it) {
        spec.fillers[it.key()] = it.value().get<std::vector<std::string>>();
    }
    for (QuestionType t : all_types()) {
        const auto& tj = j.at("types").at(to_string(t));
        TypeTemplates& tt = spec.types[static_cast<std::size_t>(t)];
        tt.stems = tj.at("stems").get<std::vector<std::string>>();
        tt.subjects = tj.at("subjects").get<std::vector<std::string>>();
        tt.co_label_prob = tj.value("co_label_prob", 0.0);
        if (tt.stems.empty() || tt.subjects.empty()) {
            throw Error("MalformedTemplate",
                        std::string("type ") + to_string(t) + " needs stems and subjects");
        }
    }
    return spec;
}

std::array<double, kNumTypes> default_class_mix() {
    std::array<double, kNumTypes> mix{};
    mix[static_cast<std::size_t>(QuestionType::MCQ)] = 2.5;
    mix[static_cast<std::size_t>(QuestionType::TCQ)] = 1.0;
    mix[static_cast<std::size_t>(QuestionType::FIB)] = 1.0;
    mix[static_cast<std::size_t>(QuestionType::SA)] = 1.5;
    mix[static_cast<std::size_t>(QuestionType::ES)] = 2.5;
    mix[static_cast<std::size_t>(QuestionType::CALC)] = 3.0;
    mix[static_cast<std::size_t>(QuestionType::OR)] = 0.5;
    mix[static_cast<std::size_t>(QuestionType::GR)] = 0.7;
    mix[static_cast<std::size_t>(QuestionType::MAT)] = 0.5;
    mix[static_cast<std::size_t>(QuestionType::LDGR)] = 0.5;
    mix[static_cast<std::size_t>(QuestionType::COD)] = 1.0;
    mix[static_cast<std::size_t>(QuestionType::TBL)] = 0.7;
    return mix;
}

std::vector<QuestionRecord> generate(const GenConfig& config, const TemplateSpec& templates) {
    if (config.n_per_class <= 0 && config.n_total <= 0) {
        throw Error("InvalidParams", "need n_per_class or n_total >= 1");
    }
    for (double p : {config.noise.drop_option_markers, config.noise.truncate_tail,
                     config.noise.casing_jitter}) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error("InvalidParams", "noise probability outside [0,1]");
    }

    Rng rng(config.seed);

    std::vector<QuestionType> plan;
    if (config.n_per_class > 0) {
        for (QuestionType t : all_types()) {
            for (int k = 0; k < config.n_per_class; ++k) plan.push_back(t);
        }
    } else {
        std::array<double, kNumTypes> mix = default_class_mix();
        double total = 0.0;
        for (double w : mix) total += w;
        for (int k = 0; k < config.n_total; ++k) {
            double r = rng.next_double() * total;
            double acc = 0.0;
            QuestionType chosen = QuestionType::TBL;
            for (QuestionType t : all_types()) {
                acc += mix[static_cast<std::size_t>(t)];
                if (r < acc) {
                    chosen = t;
                    break;
                }
            }
            plan.push_back(chosen);
        }
    }

    std::array<int, kNumTypes> counters{};
    std::vector<QuestionRecord> out;
    out.reserve(plan.size());

    for (QuestionType cls : plan) {
        bool drop_markers = rng.bernoulli(config.noise.drop_option_markers);
        bool truncate = rng.bernoulli(config.noise.truncate_tail);
        bool jitter = rng.bernoulli(config.noise.casing_jitter);

        Draft d = make_draft(cls, rng, templates, !drop_markers);
        std::string text = d.body + d.decoration;

        if (truncate) {
            std::size_t keep = std::max<std::size_t>(8, text.size() * 7 / 10);
            if (keep < text.size()) {
                while (keep > 1 && static_cast<unsigned char>(text[keep]) >= 0x80) --keep;
                text = text.substr(0, keep) + "...";
            }
        }
        if (jitter) {
            bool up = rng.bernoulli(0.5);
            for (char& c : text) {
                if (up && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
                if (!up && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            }
        }

        const TypeTemplates& tt = templates.types[static_cast<std::size_t>(cls)];
        QuestionRecord r;
        int serial = ++counters[static_cast<std::size_t>(cls)];
        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%s-%05d", config.id_prefix.c_str(),
                      to_string(cls), serial);
        r.id = idbuf;
        r.text = text;
        r.subject = pick(rng, tt.subjects);
        r.labels = d.labels;
        r.source = Source::synthetic;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace qtype::corpusgen
