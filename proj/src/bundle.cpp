#include "qtype/bundle.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qtype/util.hpp"

namespace qtype::bundle {

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    out << content;
}

std::string hex_hash(const std::string& content) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(content)));
    return buf;
}

nlohmann::json thresholds_json(const Bundle& b) {
    nlohmann::json j;
    if (b.mode == Mode::binary_mcq) {
        j["tau"] = b.mcq->threshold;
    } else {
        for (QuestionType t : all_types()) {
            j[to_string(t)] = b.multilabel->thresholds[static_cast<std::size_t>(t)];
        }
    }
    return j;
}

// Provider serialization: builtin models embed their JSON; external providers
// embed the probability table.
nlohmann::json provider_json(const ensemble::TextProvider* provider) {
    nlohmann::json j;
    if (provider == nullptr) {
        j["kind"] = "none";
        return j;
    }
    j["kind"] = provider->kind();
    if (const auto* builtin = dynamic_cast<const ensemble::BuiltinTextProvider*>(provider)) {
        j["text_model"] = textprob::text_model_to_json(builtin->model());
    } else if (const auto* external = dynamic_cast<const ensemble::ExternalTextProvider*>(provider)) {
        nlohmann::json rows = nlohmann::json::array();
        // map order is unspecified; sort ids for byte-stable output
        std::vector<std::string> ids;
        for (const auto& [id, pv] : external->probs().probs) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        for (const std::string& id : ids) {
            const ProbabilityVector& pv = external->probs().probs.at(id);
            nlohmann::json probs;
            for (QuestionType t : all_types()) probs[to_string(t)] = pv[t];
            rows.push_back({{"id", id}, {"probs", probs}});
        }
        j["provenance"] = external->probs().provenance;
        j["rows"] = rows;
    } else {
        throw Error("UnsupportedProvider", "cannot serialize this provider kind");
    }
    return j;
}

std::shared_ptr<const ensemble::TextProvider> provider_from_json(const nlohmann::json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") return nullptr;
    if (kind == "builtin") {
        return std::make_shared<ensemble::BuiltinTextProvider>(
            textprob::text_model_from_json(j.at("text_model")));
    }
    if (kind == "external") {
        textprob::ExternalProbs ep;
        ep.provenance = j.value("provenance", "");
        for (const auto& row : j.at("rows")) {
            ProbabilityVector pv;
            for (auto it = row.at("probs").begin(); it != row.at("probs").end(); ++it) {
                pv[parse_question_type(it.key())] = it.value().get<double>();
            }
            ep.probs[row.at("id").get<std::string>()] = pv;
        }
        return std::make_shared<ensemble::ExternalTextProvider>(std::move(ep));
    }
    throw Error("BundleCorrupt", "unknown provider kind '" + kind + "'");
}

}  // namespace

const char* to_string(Mode m) { return m == Mode::binary_mcq ? "binary_mcq" : "multilabel"; }

Mode parse_mode(std::string_view name) {
    if (name == "binary_mcq") return Mode::binary_mcq;
    if (name == "multilabel") return Mode::multilabel;
    throw Error("InvalidMode", "mode must be binary_mcq or multilabel, got '" +
                                   std::string(name) + "'");
}

void save_bundle(const std::string& dir, const Bundle& bundle) {
    fs::create_directories(dir);
    std::map<std::string, std::string> files;

    if (bundle.mode == Mode::binary_mcq) {
        if (!bundle.mcq) throw Error("InvalidBundle", "binary_mcq bundle without an MCQ ensemble");
        files["lexicons.json"] = features::lexicons_to_json(bundle.mcq->lexicons).dump(2);
        files["schema.json"] = features::schema_to_json(bundle.mcq->schema).dump(2);
        files["tree_model.json"] = gbt::model_to_json(bundle.mcq->tree).dump();
        files["provider.json"] = provider_json(bundle.mcq->provider.get()).dump();
    } else {
        if (!bundle.multilabel) {
            throw Error("InvalidBundle", "multilabel bundle without a multilabel ensemble");
        }
        files["lexicons.json"] = features::lexicons_to_json(bundle.multilabel->lexicons).dump(2);
        files["schema.json"] = features::schema_to_json(bundle.multilabel->schema).dump(2);
        files["ova_model.json"] = gbt::ova_to_json(bundle.multilabel->trees).dump();
        files["provider.json"] = provider_json(bundle.multilabel->provider.get()).dump();
    }
    files["thresholds.json"] = thresholds_json(bundle).dump(2);

    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["mode"] = to_string(bundle.mode);
    nlohmann::json hashes;
    std::string combined;
    for (const auto& [name, content] : files) {
        std::string h = hex_hash(content);
        hashes[name] = h;
        combined += name;
        combined += h;
    }
    manifest["files"] = hashes;
    manifest["model_version"] = hex_hash(combined);

    for (const auto& [name, content] : files) write_file(fs::path(dir) / name, content);
    write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

Bundle load_bundle(const std::string& dir) {
    fs::path root(dir);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(root / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw Error("BundleCorrupt", std::string("invalid manifest: ") + e.what());
    }

    std::map<std::string, std::string> files;
    std::string combined;
    for (auto it = manifest.at("files").begin(); it != manifest.at("files").end(); ++it) {
        std::string content = read_file(root / it.key());
        std::string h = hex_hash(content);
        if (h != it.value().get<std::string>()) {
            throw Error("BundleCorrupt", "hash mismatch for " + it.key());
        }
        combined += it.key();
        combined += h;
        files[it.key()] = std::move(content);
    }
    if (hex_hash(combined) != manifest.at("model_version").get<std::string>()) {
        throw Error("BundleCorrupt", "model_version does not match file hashes");
    }

    Bundle b;
    b.mode = parse_mode(manifest.at("mode").get<std::string>());
    b.model_version = manifest.at("model_version").get<std::string>();

    auto parse = [&](const std::string& name) { return nlohmann::json::parse(files.at(name)); };

    if (b.mode == Mode::binary_mcq) {
        ensemble::McqEnsemble e;
        e.lexicons = features::lexicons_from_json(parse("lexicons.json"));
        e.schema = features::schema_from_json(parse("schema.json"));
        e.tree = gbt::model_from_json(parse("tree_model.json"));
        e.provider = provider_from_json(parse("provider.json"));
        e.threshold = parse("thresholds.json").at("tau").get<double>();
        b.mcq = std::move(e);
    } else {
        ensemble::MultilabelEnsemble e;
        e.lexicons = features::lexicons_from_json(parse("lexicons.json"));
        e.schema = features::schema_from_json(parse("schema.json"));
        e.trees = gbt::ova_from_json(parse("ova_model.json"));
        e.provider = provider_from_json(parse("provider.json"));
        nlohmann::json th = parse("thresholds.json");
        for (QuestionType t : all_types()) {
            e.thresholds[static_cast<std::size_t>(t)] = th.at(to_string(t)).get<double>();
        }
        b.multilabel = std::move(e);
    }
    return b;
}

InferenceResult infer(const Bundle& bundle, const QuestionRecord& record) {
    InferenceResult out;
    if (bundle.mode == Mode::binary_mcq) {
        ensemble::McqPrediction p = ensemble::predict_mcq(*bundle.mcq, record);
        if (p.is_mcq) out.labels.push_back(to_string(QuestionType::MCQ));
        out.scores[to_string(QuestionType::MCQ)] = p.score;
    } else {
        ensemble::MultilabelPrediction p = ensemble::predict_labels(*bundle.multilabel, record);
        out.labels = p.labels.names();
        for (QuestionType t : all_types()) out.scores[to_string(t)] = p.probs[t];
    }
    return out;
}

}  // namespace qtype::bundle
