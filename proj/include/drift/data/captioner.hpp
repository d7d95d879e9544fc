#pragma once

#include "drift/data/manifest.hpp"
#include "drift/image.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace drift::data {

inline constexpr const char* kDefaultCaptionPrompt =
    "Describe the clinically relevant findings in this image.";

/// External captioning service. The client POSTs to <base_url>/caption with
/// {"image_base64", "image_format", "prompt"} and expects {"caption": "..."}.
struct CaptionerEndpoint {
    std::string base_url;                    // e.g. "http://127.0.0.1:8080"
    std::chrono::milliseconds timeout{5000};
    int retries = 2;                         // extra attempts after the first
    std::optional<std::string> auth_token;   // sent as a bearer token

    void validate() const;
};

struct CaptionRequestOptions {
    std::string prompt = kDefaultCaptionPrompt;
    bool fallback = false;       // unreachable endpoint -> template caption
    std::string class_name;      // used for the fallback template
};

/// Throws CaptionerUnavailableError when every attempt fails to connect or
/// times out and fallback is off; ProtocolError for non-2xx replies or
/// payloads without a non-empty "caption" string.
std::string fetch_caption(const CaptionerEndpoint& endpoint, const Image& image,
                          const CaptionRequestOptions& options);

struct CaptionBatchResult {
    std::vector<ExampleRecord> records;
    int fetched = 0;
    int fallback = 0;
};

/// Captions every record with at most max_concurrency requests in flight.
/// Output order matches input order. Records keep caption_source "captioner"
/// or "template" depending on where the text came from.
CaptionBatchResult caption_records(const CaptionerEndpoint& endpoint, std::vector<ExampleRecord> records,
                                   const std::string& prompt, bool fallback, int max_concurrency = 4);

}  // namespace drift::data
