#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qtype/core.hpp"
#include "qtype/ensemble.hpp"

namespace qtype::bundle {

enum class Mode { binary_mcq, multilabel };

const char* to_string(Mode m);
Mode parse_mode(std::string_view name);

// The serialized inference unit: models, schema, lexicons, thresholds, and a
// manifest with content hashes. model_version is the digest of the digests.
struct Bundle {
    Mode mode = Mode::binary_mcq;
    std::string model_version;
    std::optional<ensemble::McqEnsemble> mcq;
    std::optional<ensemble::MultilabelEnsemble> multilabel;
};

void save_bundle(const std::string& dir, const Bundle& bundle);

// Verifies every manifest hash; throws BundleCorrupt on mismatch.
Bundle load_bundle(const std::string& dir);

struct InferenceResult {
    std::vector<std::string> labels;
    std::map<std::string, double> scores;
};

// Single inference path shared by the CLI and the HTTP service.
InferenceResult infer(const Bundle& bundle, const QuestionRecord& record);

}  // namespace qtype::bundle
