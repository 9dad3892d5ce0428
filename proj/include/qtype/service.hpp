#pragma once

#include <memory>
#include <string>

#include "qtype/bundle.hpp"

namespace qtype::service {

// Minimal HTTP inference service over a shared immutable bundle.
//   POST /v1/predict  {"text": ..., "subject": ...} ->
//                     {"labels": [...], "scores": {...}, "model_version": ...}
//   GET  /health      200 with the bundle hash
// 400 on malformed bodies, 422 on empty text, 500 never leaks internals.
class Server {
public:
    explicit Server(std::shared_ptr<const bundle::Bundle> bundle);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds (port 0 picks a free port), serves on a background thread, and
    // returns the bound port. Throws on bind failure.
    int start(const std::string& host, int port);

    // Blocking variant for the CLI.
    void run(const std::string& host, int port);

    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace qtype::service
