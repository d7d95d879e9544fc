#include "drift/data/captioner.hpp"

#include "drift/data/image_io.hpp"
#include "drift/errors.hpp"
#include "drift/hashing.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace drift::data {
namespace {

std::string excerpt(const std::string& body) {
    constexpr std::size_t limit = 200;
    if (body.size() <= limit) return body;
    return body.substr(0, limit) + "...";
}

}  // namespace

void CaptionerEndpoint::validate() const {
    if (timeout.count() <= 0) throw ConfigError("captioner timeout must be > 0");
    if (retries < 0) throw ConfigError("captioner retries must be >= 0");
    if (base_url.empty()) throw ConfigError("captioner base_url is empty");
}

std::string fetch_caption(const CaptionerEndpoint& endpoint, const Image& image,
                          const CaptionRequestOptions& options) {
    endpoint.validate();
    const std::string pnm = encode_pnm(image);
    const nlohmann::json request = {
        {"image_base64", base64_encode(std::as_bytes(std::span<const char>(pnm)))},
        {"image_format", image.channels == 1 ? "pgm" : "ppm"},
        {"prompt", options.prompt},
    };
    const std::string payload = request.dump();

    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(endpoint.timeout);
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    if (endpoint.auth_token) client.set_bearer_token_auth(*endpoint.auth_token);

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
        auto res = client.Post("/caption", payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProtocolError(fmt::format("captioner returned HTTP {}: {}", res->status, excerpt(res->body)));
        }
        if (res->body.empty()) throw ProtocolError("captioner returned an empty body");
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
            throw ProtocolError(fmt::format("captioner reply is not JSON: {}", excerpt(res->body)));
        }
        if (!reply.is_object() || !reply.contains("caption") || !reply["caption"].is_string()) {
            throw ProtocolError(fmt::format("captioner reply lacks a caption string: {}", excerpt(res->body)));
        }
        auto caption = reply["caption"].get<std::string>();
        if (caption.empty()) throw ProtocolError(fmt::format("captioner returned an empty caption: {}", excerpt(res->body)));
        return caption;
    }
    if (options.fallback) return template_caption(options.class_name);
    throw CaptionerUnavailableError(fmt::format("captioner at {} unreachable after {} attempt(s): {}",
                                                endpoint.base_url, endpoint.retries + 1, last_error));
}

CaptionBatchResult caption_records(const CaptionerEndpoint& endpoint, std::vector<ExampleRecord> records,
                                   const std::string& prompt, bool fallback, int max_concurrency) {
    endpoint.validate();
    if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");

    std::atomic<std::size_t> next{0};
    std::atomic<int> fetched{0}, fell_back{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            {
                std::lock_guard lock(failure_mu);
                if (failure) return;
            }
            auto& r = records[i];
            try {
                // Fallback is decided here rather than inside fetch_caption so
                // the record can be tagged with where its text came from.
                CaptionRequestOptions opts{prompt, false, r.class_name};
                try {
                    r.caption = fetch_caption(endpoint, load_record_image(r), opts);
                    r.caption_source = "captioner";
                    ++fetched;
                } catch (const CaptionerUnavailableError&) {
                    if (!fallback) throw;
                    r.caption = template_caption(r.class_name);
                    r.caption_source = "template";
                    ++fell_back;
                }
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int n = std::min<int>(max_concurrency, static_cast<int>(std::max<std::size_t>(records.size(), 1)));
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return {std::move(records), fetched.load(), fell_back.load()};
}

}  // namespace drift::data
