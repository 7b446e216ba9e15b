#include "peasi/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>

#include "peasi/errors.hpp"

namespace peasi::text {

namespace {

// Decodes one UTF-8 code point at `i`, advancing `i`. Malformed bytes are
// consumed one at a time and returned verbatim so tokenization never fails.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + extra >= s.size()) {
        // Truncated sequence.
        ++i;
        return b0;
    }
    for (int k = 1; k <= extra; ++k) {
        const unsigned char bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += 1 + extra;
    return cp;
}

bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case U' ':
        case U'\t':
        case U'\n':
        case U'\r':
        case 0x0B:
        case 0x0C:
        case 0x85:    // NEL
        case 0xA0:    // NBSP
        case 0x1680:  // ogham space
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_ascii_punct(char32_t cp) {
    return cp < 0x80 && (std::ispunct(static_cast<int>(cp)) != 0);
}

void append_codepoint(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

const std::vector<std::pair<std::string, int>>& reserved_tokens() {
    static const std::vector<std::pair<std::string, int>> kReserved = {
        {"[PAD]", Vocabulary::kPad},
        {"[CLS]", Vocabulary::kCls},
        {"[SEP]", Vocabulary::kSep},
        {"[UNK]", Vocabulary::kUnk},
    };
    return kReserved;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> tokens;
    std::string word;
    const auto flush = [&] {
        if (!word.empty()) {
            tokens.push_back(word);
            word.clear();
        }
    };
    std::size_t i = 0;
    while (i < input.size()) {
        const char32_t cp = next_codepoint(input, i);
        if (is_unicode_space(cp)) {
            flush();
        } else if (is_ascii_punct(cp)) {
            flush();
            tokens.emplace_back(1, static_cast<char>(cp));
        } else {
            char32_t lowered = cp;
            if (cp >= U'A' && cp <= U'Z') lowered = cp + 32;
            append_codepoint(word, lowered);
        }
    }
    flush();
    return tokens;
}

std::vector<std::string> split_sentences(std::string_view input) {
    std::vector<std::string> sentences;
    const auto emit = [&](std::size_t begin, std::size_t end) {
        while (begin < end && std::isspace(static_cast<unsigned char>(input[begin]))) ++begin;
        while (end > begin && std::isspace(static_cast<unsigned char>(input[end - 1]))) --end;
        if (end > begin) sentences.emplace_back(input.substr(begin, end - begin));
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const char c = input[i];
        if (c != '.' && c != '?' && c != '!') continue;
        std::size_t j = i + 1;
        while (j < input.size() && std::isspace(static_cast<unsigned char>(input[j]))) ++j;
        if (j == input.size()) {
            emit(start, i + 1);
            start = input.size();
            break;
        }
        if (j > i + 1 && input[j] >= 'A' && input[j] <= 'Z') {
            emit(start, i + 1);
            start = j;
        }
    }
    emit(start, input.size());
    return sentences;
}

Vocabulary::Vocabulary() {
    for (const auto& [tok, id] : reserved_tokens()) ids_.emplace(tok, id);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_lists) {
    std::unordered_map<std::string, long> counts;
    for (const auto& list : token_lists)
        for (const auto& tok : list) ++counts[tok];
    return build_from_counts(counts);
}

Vocabulary Vocabulary::build_from_counts(const std::unordered_map<std::string, long>& counts) {
    std::vector<std::pair<std::string, long>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    int next = 4;
    for (const auto& [tok, freq] : entries) {
        (void)freq;
        if (v.ids_.contains(tok)) continue;  // reserved surface forms stay reserved
        v.ids_.emplace(tok, next++);
    }
    v.size_ = static_cast<std::size_t>(next);
    return v;
}

int Vocabulary::id(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return ids_.contains(token);
}

void Vocabulary::save(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw Error("cannot write vocabulary file: " + file.string());
    // Reserved first, then by id.
    std::map<int, std::string> by_id;
    for (const auto& [tok, id] : ids_) by_id.emplace(id, tok);
    for (const auto& [id, tok] : by_id) out << tok << '\t' << id << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot read vocabulary file: " + file.string());
    Vocabulary v;
    std::string line;
    int max_id = 3;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error("malformed vocabulary line: " + line);
        const std::string tok = line.substr(0, tab);
        const int id = std::stoi(line.substr(tab + 1));
        v.ids_[tok] = id;
        max_id = std::max(max_id, id);
    }
    v.size_ = static_cast<std::size_t>(max_id) + 1;
    return v;
}

namespace {

TokenSequence assemble(std::span<const std::string> question_tokens,
                       const std::vector<int>& body_ids, const Vocabulary& vocab,
                       std::size_t max_seq_len) {
    if (max_seq_len < 4) throw Error("max_seq_len must be >= 4");
    if (question_tokens.size() + 2 > max_seq_len)
        throw QuestionTooLong("question of " + std::to_string(question_tokens.size()) +
                              " tokens cannot fit in max_seq_len " + std::to_string(max_seq_len));

    TokenSequence seq;
    seq.ids.push_back(Vocabulary::kCls);
    seq.segments.push_back(0);
    for (const auto& tok : question_tokens) {
        seq.ids.push_back(vocab.id(tok));
        seq.segments.push_back(0);
    }
    seq.ids.push_back(Vocabulary::kSep);
    seq.segments.push_back(0);

    const std::size_t room = max_seq_len - seq.ids.size();
    const std::size_t take = std::min(room, body_ids.size());
    for (std::size_t i = 0; i < take; ++i) {
        seq.ids.push_back(body_ids[i]);
        seq.segments.push_back(1);
    }
    seq.positions.resize(seq.ids.size());
    for (std::size_t i = 0; i < seq.positions.size(); ++i) seq.positions[i] = static_cast<int>(i);
    return seq;
}

}  // namespace

TokenSequence encode_pair(std::span<const std::string> question_tokens,
                          std::span<const std::string> body_tokens,
                          const Vocabulary& vocab, std::size_t max_seq_len) {
    std::vector<int> body_ids;
    body_ids.reserve(body_tokens.size());
    for (const auto& tok : body_tokens) body_ids.push_back(vocab.id(tok));
    return assemble(question_tokens, body_ids, vocab, max_seq_len);
}

TokenSequence encode_multi(std::span<const std::string> question_tokens,
                           const std::vector<std::vector<std::string>>& sentences,
                           const Vocabulary& vocab, std::size_t max_seq_len) {
    std::vector<int> body_ids;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        if (s > 0) body_ids.push_back(Vocabulary::kSep);
        for (const auto& tok : sentences[s]) body_ids.push_back(vocab.id(tok));
    }
    return assemble(question_tokens, body_ids, vocab, max_seq_len);
}

}  // namespace peasi::text
