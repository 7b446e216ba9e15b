#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace peasi::text {

// Lowercases, splits on Unicode whitespace, and emits each ASCII punctuation
// mark as its own token. Bytes >= 0x80 that are not whitespace are treated as
// word characters. Deterministic; empty input yields an empty list.
std::vector<std::string> tokenize(std::string_view input);

// Splits after '.', '?' or '!' when followed by whitespace and an uppercase
// ASCII letter, or by end of text. The delimiter stays with its sentence and
// no empty sentences are produced.
std::vector<std::string> split_sentences(std::string_view input);

// Token inventory with four reserved ids. Construction is deterministic:
// tokens are assigned ids in (descending frequency, ascending lexicographic)
// order starting at 4. Immutable after construction.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kCls = 1;
    static constexpr int kSep = 2;
    static constexpr int kUnk = 3;

    Vocabulary();

    static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists);
    static Vocabulary build_from_counts(const std::unordered_map<std::string, long>& counts);

    // Reserved surface forms ("[PAD]" etc.) map to their reserved ids;
    // anything unknown maps to kUnk.
    int id(const std::string& token) const;
    bool contains(const std::string& token) const;
    std::size_t size() const { return size_; }

    // One "token<TAB>id" line per entry, reserved tokens first.
    void save(const std::filesystem::path& file) const;
    static Vocabulary load(const std::filesystem::path& file);

private:
    std::unordered_map<std::string, int> ids_;
    std::size_t size_ = 4;
};

// Encoder input: ids with segment and position channels, all equal length.
// The first id is always [CLS]; positions are 0-based indices.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<int> segments;
    std::vector<int> positions;

    std::size_t length() const { return ids.size(); }
};

// [CLS] question [SEP] body. Segment 0 covers [CLS], the question and the
// first [SEP]; segment 1 covers the body. The body is truncated from the
// right when over max_seq_len; the question is never truncated and a question
// that cannot fit raises QuestionTooLong.
TokenSequence encode_pair(std::span<const std::string> question_tokens,
                          std::span<const std::string> body_tokens,
                          const Vocabulary& vocab, std::size_t max_seq_len);

// Same assembly, with body = s1 [SEP] s2 ... [SEP] sk (no trailing [SEP]).
TokenSequence encode_multi(std::span<const std::string> question_tokens,
                           const std::vector<std::vector<std::string>>& sentences,
                           const Vocabulary& vocab, std::size_t max_seq_len);

}  // namespace peasi::text
