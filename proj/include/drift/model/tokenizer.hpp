#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace drift::model {

/// Lower-cased word tokenizer with a hashed vocabulary.
///
/// Word characters are [a-z0-9_-]; everything else separates words. Ids 0..2
/// are reserved for PAD, BOS and EOS.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;

    explicit Tokenizer(int vocab_size) : vocab_size_(vocab_size) {}

    static std::vector<std::string> split(std::string_view text);
    int word_id(std::string_view word) const;

    /// Word ids without BOS/EOS.
    std::vector<int> encode_words(std::string_view text) const;
    /// BOS + words + EOS.
    std::vector<int> encode(std::string_view text) const;

    int vocab_size() const { return vocab_size_; }

private:
    int vocab_size_;
};

/// "a photo of a <class>" optionally followed by the caption text.
std::string class_prompt_text(std::string_view class_name, std::string_view caption = {});

}  // namespace drift::model
