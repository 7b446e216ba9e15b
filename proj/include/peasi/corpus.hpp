#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace peasi::corpus {

enum class SentenceLabel { positive, negative, unlabeled };
enum class PassageLabel { positive, negative };
enum class PassageGroup { all, center, random };

std::string to_string(SentenceLabel l);
std::string to_string(PassageLabel l);
SentenceLabel sentence_label_from_string(const std::string& s);
PassageLabel passage_label_from_string(const std::string& s);
PassageGroup passage_group_from_string(const std::string& s);
std::string to_string(PassageGroup g);

struct Document {
    std::string doc_id;
    std::string title;
    std::string body;
};

struct Question {
    std::string question_id;
    std::string text;
};

// One annotation row: the judgment for (question, sentence).
struct QaLabel {
    std::string question_id;
    std::string doc_id;
    std::string sent_id;
    std::string text;
    SentenceLabel label = SentenceLabel::unlabeled;
};

struct LabeledSentence {
    std::string sent_id;
    std::string text;
    SentenceLabel label = SentenceLabel::unlabeled;
};

// Contiguous sentence run from one document, the unit PR ranks and EASI
// classifies within. Token count over all sentences stays within the
// generation budget; label is positive iff some sentence label is positive.
struct Passage {
    std::string passage_id;
    std::string doc_id;
    std::string question_id;
    std::vector<LabeledSentence> sentences;
    PassageLabel label = PassageLabel::negative;
    std::optional<int> answer_position;  // 1-based index of the positive sentence
    int token_count = 0;
};

struct DatasetSplit {
    std::string name;  // train | dev | test
    std::vector<Question> questions;
    std::vector<Document> documents;
    std::vector<QaLabel> qa_labels;
    std::vector<Passage> passages;
};

// Table-1 shaped counters.
struct SplitStats {
    long questions = 0;
    long documents = 0;
    long qp_pairs = 0;
    long qp_pos = 0;
    long qp_neg = 0;
    long qa_pairs = 0;
    long qa_pos = 0;
    long qa_neg = 0;
};

// A document sentence with its precomputed token count, the windowing input.
struct SentenceInfo {
    std::string sent_id;
    std::string text;
    int token_count = 0;
};

struct WindowingOptions {
    int max_tokens = 200;
    int max_windows = 5;
    int k_max = 5;
};

// Sliding windows around the target sentence: up to max_windows contiguous
// runs, each containing the target, each within max_tokens and k_max
// sentences. Window i (when the document boundary and budget permit) places
// the target at 1-based position i; each window fills greedily to the right.
// At least the singleton window is returned. Sentence labels in the returned
// shells are unlabeled.
std::vector<Passage> windows_for_sentence(const std::vector<SentenceInfo>& document_sentences,
                                          int target_index, const WindowingOptions& opt,
                                          const std::string& question_id,
                                          const std::string& doc_id);

// Applies the question-passage relevance rule: a passage is positive iff it
// contains at least one sentence judged positive for the question.
// answer_position is the first positive sentence's 1-based index. Throws
// UnknownSentence when a passage references a sentence id that is not in the
// document's sentence list.
void propagate_labels(const std::string& question_id,
                      const std::unordered_map<std::string, SentenceLabel>& sentence_labels,
                      const std::unordered_set<std::string>& document_sentence_ids,
                      std::vector<Passage>& passages);

// Passage-group filter. Positive passages are grouped by
// (question_id, positive sentence); `center` keeps passages whose
// answer_position equals ceil(sentence_count / 2) -- when that empties a
// group, the position closest to the center is kept, ties toward the smaller
// position; `random` keeps exactly one seeded uniform choice per group.
// Negative passages pass through every group unchanged.
std::vector<Passage> select_passage_group(const std::vector<Passage>& passages, PassageGroup group,
                                          std::uint64_t seed);

SplitStats split_stats(const DatasetSplit& split);

// ---- token helpers shared by training and pipelines ----

std::vector<std::string> passage_flat_tokens(const Passage& p);
std::vector<std::vector<std::string>> passage_sentence_tokens(const Passage& p);

// ---- JSONL persistence (UTF-8, one record per line) ----

void write_documents(const std::filesystem::path& file, const std::vector<Document>& docs);
void write_questions(const std::filesystem::path& file, const std::vector<Question>& questions);
void write_qa_labels(const std::filesystem::path& file, const std::vector<QaLabel>& labels);
void write_passages(const std::filesystem::path& file, const std::vector<Passage>& passages);

std::vector<Document> read_documents(const std::filesystem::path& file);
std::vector<Question> read_questions(const std::filesystem::path& file);
std::vector<QaLabel> read_qa_labels(const std::filesystem::path& file);
std::vector<Passage> read_passages(const std::filesystem::path& file);

// Loads <dir>/<name>/{documents,questions,qa_labels[,passages]}.jsonl.
DatasetSplit load_split(const std::filesystem::path& dir, const std::string& name,
                        bool require_passages);

// Builds passages for every split found under in_dir and writes
// <out_dir>/<split>/passages.jsonl plus the input files it consumed.
struct BuildCorpusOptions {
    WindowingOptions window;
    PassageGroup group = PassageGroup::all;
    std::uint64_t seed = 0;
};

DatasetSplit build_split_passages(DatasetSplit split, const BuildCorpusOptions& opt);

}  // namespace peasi::corpus
