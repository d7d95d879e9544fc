#include "drift/model/tokenizer.hpp"

#include "drift/hashing.hpp"

#include <cctype>

namespace drift::model {

std::vector<std::string> Tokenizer::split(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char raw : text) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
            cur += c;
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

int Tokenizer::word_id(std::string_view word) const {
    const auto buckets = static_cast<std::uint64_t>(vocab_size_ - 3);
    return 3 + static_cast<int>(fnv1a64(word) % buckets);
}

std::vector<int> Tokenizer::encode_words(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& w : split(text)) ids.push_back(word_id(w));
    return ids;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids{kBos};
    for (int id : encode_words(text)) ids.push_back(id);
    ids.push_back(kEos);
    return ids;
}

std::string class_prompt_text(std::string_view class_name, std::string_view caption) {
    std::string out = "a photo of a ";
    out += class_name;
    if (!caption.empty()) {
        out += ' ';
        out += caption;
    }
    return out;
}

}  // namespace drift::model
