#include "qtype/service.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace qtype::service {

struct Server::Impl {
    std::shared_ptr<const bundle::Bundle> bundle;
    httplib::Server svr;
    std::thread worker;

    explicit Impl(std::shared_ptr<const bundle::Bundle> b) : bundle(std::move(b)) {
        if (bundle->mode == bundle::Mode::binary_mcq && bundle->mcq->provider &&
            bundle->mcq->provider->kind() == "external") {
            throw Error("UnsupportedProvider",
                        "external-probability bundles cannot serve; requests carry no record id");
        }
        if (bundle->mode == bundle::Mode::multilabel && bundle->multilabel->provider &&
            bundle->multilabel->provider->kind() == "external") {
            throw Error("UnsupportedProvider",
                        "external-probability bundles cannot serve; requests carry no record id");
        }
        install_routes();
    }

    void install_routes() {
        svr.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json body;
            body["status"] = "ok";
            body["model_version"] = bundle->model_version;
            res.set_content(body.dump(), "application/json");
        });

        svr.Post("/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                res.status = 400;
                res.set_content(R"({"error":"malformed JSON body"})", "application/json");
                return;
            }
            if (!body.is_object() || !body.contains("text") || !body.at("text").is_string() ||
                (body.contains("subject") && !body.at("subject").is_string())) {
                res.status = 400;
                res.set_content(R"({"error":"body must be {\"text\": string, \"subject\": string}"})",
                                "application/json");
                return;
            }
            QuestionRecord record;
            record.text = body.at("text").get<std::string>();
            record.subject = body.value("subject", std::string());
            if (trim(record.text).empty()) {
                res.status = 422;
                res.set_content(R"({"error":"text must be non-empty"})", "application/json");
                return;
            }
            try {
                bundle::InferenceResult result = bundle::infer(*bundle, record);
                nlohmann::json out;
                out["labels"] = result.labels;
                out["scores"] = result.scores;
                out["model_version"] = bundle->model_version;
                res.set_content(out.dump(), "application/json");
            } catch (...) {
                res.status = 500;
                res.set_content(R"({"error":"internal error"})", "application/json");
            }
        });
    }
};

Server::Server(std::shared_ptr<const bundle::Bundle> bundle)
    : impl_(std::make_unique<Impl>(std::move(bundle))) {}

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->svr.bind_to_any_port(host);
        if (bound <= 0) throw Error("BindFailed", "cannot bind to " + host);
    } else {
        if (!impl_->svr.bind_to_port(host, port)) {
            throw Error("BindFailed", "cannot bind to " + host + ":" + std::to_string(port));
        }
    }
    impl_->worker = std::thread([this] { impl_->svr.listen_after_bind(); });
    impl_->svr.wait_until_ready();
    return bound;
}

void Server::run(const std::string& host, int port) {
    if (!impl_->svr.listen(host, port)) {
        throw Error("BindFailed", "cannot listen on " + host + ":" + std::to_string(port));
    }
}

void Server::stop() {
    if (!impl_) return;
    impl_->svr.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace qtype::service
