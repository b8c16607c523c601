// Stand-in embedding service for exercising the remote cue provider without
// CLIP/InstructBLIP. Emits a deterministic embedding derived from the request
// id; --fail-first N makes the first N requests return 500 so retry behavior
// can be observed. Requests are logged to stdout, one line each.

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <iostream>
#include <string>

#include <json.hpp>

using nlohmann::json;

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mock embedding server for the omnigaze remote cue protocol"};
    int port = 8787;
    size_t visual_dim = 9 * 16;
    size_t text_dim = 4 * 16;
    int fail_first = 0;
    app.add_option("--port", port, "listen port")->capture_default_str();
    app.add_option("--visual-dim", visual_dim, "embedding length for kind=visual")
        ->capture_default_str();
    app.add_option("--text-dim", text_dim, "embedding length for kind=text")
        ->capture_default_str();
    app.add_option("--fail-first", fail_first, "return 500 for the first N requests")
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    std::atomic<int> request_count{0};
    httplib::Server server;
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++request_count;
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            res.status = 400;
            res.set_content("{\"error\":\"bad json\"}", "application/json");
            return;
        }
        const std::string kind = body.value("kind", "");
        const std::string id = body.value("id", "");
        std::cout << "request " << n << " kind=" << kind << " id=" << id << std::endl;
        if (n <= fail_first) {
            res.status = 500;
            res.set_content("{\"error\":\"synthetic failure\"}", "application/json");
            return;
        }
        const size_t dim = kind == "visual" ? visual_dim : text_dim;
        json reply;
        reply["id"] = id;
        json emb = json::array();
        uint64_t h = fnv1a(kind + ":" + id);
        for (size_t i = 0; i < dim; ++i) {
            h = h * 6364136223846793005ull + 1442695040888963407ull;
            emb.push_back(static_cast<float>(static_cast<int64_t>(h >> 40) % 1000) / 500.0f -
                          1.0f);
        }
        reply["embedding"] = std::move(emb);
        res.set_content(reply.dump(), "application/json");
    });

    std::cout << "listening on :" << port << std::endl;
    server.listen("0.0.0.0", port);
    return 0;
}
