#include "peasi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "peasi/errors.hpp"
#include "peasi/rng.hpp"
#include "peasi/text.hpp"

namespace peasi::corpus {

using nlohmann::json;

std::string to_string(SentenceLabel l) {
    switch (l) {
        case SentenceLabel::positive: return "positive";
        case SentenceLabel::negative: return "negative";
        case SentenceLabel::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::string to_string(PassageLabel l) {
    return l == PassageLabel::positive ? "positive" : "negative";
}

std::string to_string(PassageGroup g) {
    switch (g) {
        case PassageGroup::all: return "all";
        case PassageGroup::center: return "center";
        case PassageGroup::random: return "random";
    }
    return "all";
}

SentenceLabel sentence_label_from_string(const std::string& s) {
    if (s == "positive") return SentenceLabel::positive;
    if (s == "negative") return SentenceLabel::negative;
    if (s == "unlabeled") return SentenceLabel::unlabeled;
    throw Error("unknown sentence label: " + s);
}

PassageLabel passage_label_from_string(const std::string& s) {
    if (s == "positive") return PassageLabel::positive;
    if (s == "negative") return PassageLabel::negative;
    throw Error("unknown passage label: " + s);
}

PassageGroup passage_group_from_string(const std::string& s) {
    if (s == "all") return PassageGroup::all;
    if (s == "center") return PassageGroup::center;
    if (s == "random") return PassageGroup::random;
    throw Error("unknown passage group: " + s);
}

std::vector<Passage> windows_for_sentence(const std::vector<SentenceInfo>& document_sentences,
                                          int target_index, const WindowingOptions& opt,
                                          const std::string& question_id,
                                          const std::string& doc_id) {
    const int n = static_cast<int>(document_sentences.size());
    if (target_index < 0 || target_index >= n)
        throw Error("windows_for_sentence: target index " + std::to_string(target_index) +
                    " out of range [0, " + std::to_string(n) + ")");

    std::vector<Passage> windows;
    std::vector<std::pair<int, int>> seen;  // [start, end) spans already emitted
    for (int offset = 0; offset < opt.max_windows; ++offset) {
        const int start = target_index - offset;
        if (start < 0) break;
        // Greedy right fill from `start`, within the token and sentence budgets.
        int end = start;
        int tokens = 0;
        while (end < n && end - start < opt.k_max) {
            const int next = document_sentences[static_cast<std::size_t>(end)].token_count;
            if (end > start && tokens + next > opt.max_tokens) break;
            if (end == start && next > opt.max_tokens) break;
            tokens += next;
            ++end;
        }
        if (end <= target_index) continue;  // budget ran out before reaching the target
        const std::pair<int, int> span{start, end};
        if (std::find(seen.begin(), seen.end(), span) != seen.end()) continue;
        seen.push_back(span);

        Passage p;
        p.doc_id = doc_id;
        p.question_id = question_id;
        p.passage_id = question_id + ":" + doc_id + ":" + std::to_string(start) + "-" +
                       std::to_string(end);
        p.token_count = tokens;
        for (int i = start; i < end; ++i) {
            const auto& s = document_sentences[static_cast<std::size_t>(i)];
            p.sentences.push_back({s.sent_id, s.text, SentenceLabel::unlabeled});
        }
        windows.push_back(std::move(p));
    }
    return windows;
}

void propagate_labels(const std::string& question_id,
                      const std::unordered_map<std::string, SentenceLabel>& sentence_labels,
                      const std::unordered_set<std::string>& document_sentence_ids,
                      std::vector<Passage>& passages) {
    for (auto& p : passages) {
        p.question_id = question_id;
        p.label = PassageLabel::negative;
        p.answer_position.reset();
        for (std::size_t i = 0; i < p.sentences.size(); ++i) {
            auto& s = p.sentences[i];
            if (!document_sentence_ids.contains(s.sent_id))
                throw UnknownSentence("passage " + p.passage_id + " references sentence " +
                                      s.sent_id + " absent from document " + p.doc_id);
            const auto it = sentence_labels.find(s.sent_id);
            s.label = it == sentence_labels.end() ? SentenceLabel::unlabeled : it->second;
            if (s.label == SentenceLabel::positive && !p.answer_position.has_value()) {
                p.label = PassageLabel::positive;
                p.answer_position = static_cast<int>(i) + 1;
            }
        }
    }
}

std::vector<Passage> select_passage_group(const std::vector<Passage>& passages, PassageGroup group,
                                          std::uint64_t seed) {
    if (group == PassageGroup::all) return passages;

    // Group positive passages by (question, answer sentence); negatives pass
    // through untouched.
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        const auto& p = passages[i];
        if (p.label != PassageLabel::positive || !p.answer_position.has_value()) continue;
        const auto& answer_sent =
            p.sentences[static_cast<std::size_t>(*p.answer_position - 1)].sent_id;
        groups[{p.question_id, answer_sent}].push_back(i);
    }

    std::unordered_set<std::size_t> keep;
    Rng rng(seed);
    for (const auto& [key, members] : groups) {
        (void)key;
        if (group == PassageGroup::center) {
            std::vector<std::size_t> centered;
            for (const auto idx : members) {
                const auto& p = passages[idx];
                const int count = static_cast<int>(p.sentences.size());
                const int center = (count + 1) / 2;
                if (*p.answer_position == center) centered.push_back(idx);
            }
            if (centered.empty()) {
                // Fall back to the position closest to the center, smaller
                // position on ties.
                int best_dist = std::numeric_limits<int>::max();
                int best_pos = std::numeric_limits<int>::max();
                for (const auto idx : members) {
                    const auto& p = passages[idx];
                    const int count = static_cast<int>(p.sentences.size());
                    const int dist = std::abs(*p.answer_position - (count + 1) / 2);
                    if (dist < best_dist || (dist == best_dist && *p.answer_position < best_pos)) {
                        best_dist = dist;
                        best_pos = *p.answer_position;
                    }
                }
                for (const auto idx : members) {
                    const auto& p = passages[idx];
                    const int count = static_cast<int>(p.sentences.size());
                    if (std::abs(*p.answer_position - (count + 1) / 2) == best_dist &&
                        *p.answer_position == best_pos)
                        centered.push_back(idx);
                }
            }
            keep.insert(centered.begin(), centered.end());
        } else {  // random
            keep.insert(members[rng.below(members.size())]);
        }
    }

    std::vector<Passage> out;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        const auto& p = passages[i];
        const bool positive = p.label == PassageLabel::positive && p.answer_position.has_value();
        if (!positive || keep.contains(i)) out.push_back(p);
    }
    return out;
}

SplitStats split_stats(const DatasetSplit& split) {
    SplitStats s;
    s.questions = static_cast<long>(split.questions.size());
    s.documents = static_cast<long>(split.documents.size());
    for (const auto& p : split.passages) {
        ++s.qp_pairs;
        if (p.label == PassageLabel::positive)
            ++s.qp_pos;
        else
            ++s.qp_neg;
    }
    for (const auto& l : split.qa_labels) {
        if (l.label == SentenceLabel::unlabeled) continue;
        ++s.qa_pairs;
        if (l.label == SentenceLabel::positive)
            ++s.qa_pos;
        else
            ++s.qa_neg;
    }
    return s;
}

std::vector<std::string> passage_flat_tokens(const Passage& p) {
    std::vector<std::string> tokens;
    for (const auto& s : p.sentences) {
        auto t = text::tokenize(s.text);
        tokens.insert(tokens.end(), t.begin(), t.end());
    }
    return tokens;
}

std::vector<std::vector<std::string>> passage_sentence_tokens(const Passage& p) {
    std::vector<std::vector<std::string>> out;
    out.reserve(p.sentences.size());
    for (const auto& s : p.sentences) out.push_back(text::tokenize(s.text));
    return out;
}

// ---- JSONL ----

namespace {

void write_lines(const std::filesystem::path& file, const std::vector<json>& records) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    for (const auto& r : records) out << r.dump() << '\n';
}

std::vector<json> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot read " + file.string());
    std::vector<json> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(json::parse(line));
    }
    return records;
}

json passage_to_json(const Passage& p) {
    json sentences = json::array();
    for (const auto& s : p.sentences)
        sentences.push_back({{"sent_id", s.sent_id}, {"text", s.text}, {"label", to_string(s.label)}});
    json j{{"passage_id", p.passage_id},
           {"doc_id", p.doc_id},
           {"question_id", p.question_id},
           {"sentences", sentences},
           {"label", to_string(p.label)}};
    if (p.answer_position.has_value()) j["answer_position"] = *p.answer_position;
    return j;
}

Passage passage_from_json(const json& j) {
    Passage p;
    p.passage_id = j.at("passage_id").get<std::string>();
    p.doc_id = j.at("doc_id").get<std::string>();
    p.question_id = j.at("question_id").get<std::string>();
    for (const auto& s : j.at("sentences")) {
        LabeledSentence ls;
        ls.sent_id = s.at("sent_id").get<std::string>();
        ls.text = s.at("text").get<std::string>();
        ls.label = sentence_label_from_string(s.at("label").get<std::string>());
        p.sentences.push_back(std::move(ls));
    }
    p.label = passage_label_from_string(j.at("label").get<std::string>());
    if (j.contains("answer_position")) p.answer_position = j.at("answer_position").get<int>();
    for (const auto& s : p.sentences)
        p.token_count += static_cast<int>(text::tokenize(s.text).size());
    return p;
}

}  // namespace

void write_documents(const std::filesystem::path& file, const std::vector<Document>& docs) {
    std::vector<json> records;
    records.reserve(docs.size());
    for (const auto& d : docs)
        records.push_back({{"doc_id", d.doc_id}, {"title", d.title}, {"body", d.body}});
    write_lines(file, records);
}

void write_questions(const std::filesystem::path& file, const std::vector<Question>& questions) {
    std::vector<json> records;
    records.reserve(questions.size());
    for (const auto& q : questions)
        records.push_back({{"question_id", q.question_id}, {"text", q.text}});
    write_lines(file, records);
}

void write_qa_labels(const std::filesystem::path& file, const std::vector<QaLabel>& labels) {
    std::vector<json> records;
    records.reserve(labels.size());
    for (const auto& l : labels)
        records.push_back({{"question_id", l.question_id},
                           {"doc_id", l.doc_id},
                           {"sent_id", l.sent_id},
                           {"text", l.text},
                           {"label", to_string(l.label)}});
    write_lines(file, records);
}

void write_passages(const std::filesystem::path& file, const std::vector<Passage>& passages) {
    std::vector<json> records;
    records.reserve(passages.size());
    for (const auto& p : passages) records.push_back(passage_to_json(p));
    write_lines(file, records);
}

std::vector<Document> read_documents(const std::filesystem::path& file) {
    std::vector<Document> out;
    for (const auto& j : read_lines(file))
        out.push_back({j.at("doc_id").get<std::string>(), j.at("title").get<std::string>(),
                       j.at("body").get<std::string>()});
    return out;
}

std::vector<Question> read_questions(const std::filesystem::path& file) {
    std::vector<Question> out;
    for (const auto& j : read_lines(file))
        out.push_back({j.at("question_id").get<std::string>(), j.at("text").get<std::string>()});
    return out;
}

std::vector<QaLabel> read_qa_labels(const std::filesystem::path& file) {
    std::vector<QaLabel> out;
    for (const auto& j : read_lines(file)) {
        QaLabel l;
        l.question_id = j.at("question_id").get<std::string>();
        l.doc_id = j.at("doc_id").get<std::string>();
        l.sent_id = j.at("sent_id").get<std::string>();
        l.text = j.at("text").get<std::string>();
        l.label = sentence_label_from_string(j.at("label").get<std::string>());
        out.push_back(std::move(l));
    }
    return out;
}

std::vector<Passage> read_passages(const std::filesystem::path& file) {
    std::vector<Passage> out;
    for (const auto& j : read_lines(file)) out.push_back(passage_from_json(j));
    return out;
}

DatasetSplit load_split(const std::filesystem::path& dir, const std::string& name,
                        bool require_passages) {
    DatasetSplit split;
    split.name = name;
    const auto base = dir / name;
    split.documents = read_documents(base / "documents.jsonl");
    split.questions = read_questions(base / "questions.jsonl");
    split.qa_labels = read_qa_labels(base / "qa_labels.jsonl");
    const auto passages_file = base / "passages.jsonl";
    if (std::filesystem::exists(passages_file))
        split.passages = read_passages(passages_file);
    else if (require_passages)
        throw Error("missing " + passages_file.string() + "; run build-corpus first");
    return split;
}

DatasetSplit build_split_passages(DatasetSplit split, const BuildCorpusOptions& opt) {
    // Sentence inventory per document, with token counts. Sentences longer
    // than the window budget are truncated to keep the windowing precondition.
    std::unordered_map<std::string, std::vector<SentenceInfo>> doc_sentences;
    for (const auto& doc : split.documents) {
        std::vector<SentenceInfo> infos;
        const auto sentences = text::split_sentences(doc.body);
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            SentenceInfo info;
            info.sent_id = doc.doc_id + ":s" + std::to_string(i);
            info.text = sentences[i];
            auto tokens = text::tokenize(info.text);
            if (static_cast<int>(tokens.size()) > opt.window.max_tokens) {
                tokens.resize(static_cast<std::size_t>(opt.window.max_tokens));
                std::string joined;
                for (std::size_t k = 0; k < tokens.size(); ++k) {
                    if (k > 0) joined += ' ';
                    joined += tokens[k];
                }
                info.text = joined;
            }
            info.token_count = static_cast<int>(tokens.size());
            infos.push_back(std::move(info));
        }
        doc_sentences.emplace(doc.doc_id, std::move(infos));
    }

    // Labeled sentences per question, grouped per document.
    std::map<std::string, std::map<std::string, std::vector<const QaLabel*>>> per_question;
    for (const auto& l : split.qa_labels) per_question[l.question_id][l.doc_id].push_back(&l);

    split.passages.clear();
    for (const auto& q : split.questions) {
        const auto qit = per_question.find(q.question_id);
        if (qit == per_question.end()) continue;
        std::vector<Passage> question_passages;
        std::unordered_set<std::string> seen_spans;
        for (const auto& [doc_id, labels] : qit->second) {
            const auto dit = doc_sentences.find(doc_id);
            if (dit == doc_sentences.end())
                throw Error("qa label references unknown document " + doc_id);
            const auto& infos = dit->second;
            std::unordered_map<std::string, int> index_of;
            for (std::size_t i = 0; i < infos.size(); ++i) index_of[infos[i].sent_id] = static_cast<int>(i);

            std::unordered_map<std::string, SentenceLabel> label_of;
            std::unordered_set<std::string> doc_ids;
            for (const auto& info : infos) doc_ids.insert(info.sent_id);

            std::vector<Passage> doc_passages;
            for (const QaLabel* l : labels) {
                const auto iit = index_of.find(l->sent_id);
                if (iit == index_of.end())
                    throw UnknownSentence("label references sentence " + l->sent_id +
                                          " absent from document " + doc_id);
                label_of[l->sent_id] = l->label;
                auto windows = windows_for_sentence(infos, iit->second, opt.window,
                                                    q.question_id, doc_id);
                for (auto& w : windows) {
                    if (seen_spans.contains(w.passage_id)) continue;
                    seen_spans.insert(w.passage_id);
                    doc_passages.push_back(std::move(w));
                }
            }
            propagate_labels(q.question_id, label_of, doc_ids, doc_passages);
            question_passages.insert(question_passages.end(),
                                     std::make_move_iterator(doc_passages.begin()),
                                     std::make_move_iterator(doc_passages.end()));
        }
        auto selected = select_passage_group(question_passages, opt.group, opt.seed);
        split.passages.insert(split.passages.end(), std::make_move_iterator(selected.begin()),
                              std::make_move_iterator(selected.end()));
    }
    return split;
}

}  // namespace peasi::corpus
