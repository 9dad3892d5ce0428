#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qtype/core.hpp"

namespace qtype::corpusgen {

struct NoiseConfig {
    double drop_option_markers = 0.0;
    double truncate_tail = 0.0;
    double casing_jitter = 0.0;
};

struct GenConfig {
    std::uint64_t seed = 0;
    int n_per_class = 0;  // per-class mode when > 0
    int n_total = 0;      // weighted-mix mode otherwise
    NoiseConfig noise;
    std::string id_prefix = "syn";
};

struct TypeTemplates {
    std::vector<std::string> stems;
    std::vector<std::string> subjects;
    double co_label_prob = 0.0;
};

struct TemplateSpec {
    std::map<std::string, std::vector<std::string>> fillers;
    std::array<TypeTemplates, kNumTypes> types;
};

TemplateSpec load_templates(const std::string& path);

// Class weights for weighted-mix mode, skewed toward CALC/ES/MCQ.
std::array<double, kNumTypes> default_class_mix();

// Deterministic under seed: same config + templates give byte-identical
// records. Clean (noise-free) decorations are always detectable by qparse.
std::vector<QuestionRecord> generate(const GenConfig& config, const TemplateSpec& templates);

}  // namespace qtype::corpusgen
