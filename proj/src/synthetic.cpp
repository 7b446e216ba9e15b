#include "peasi/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "peasi/errors.hpp"
#include "peasi/rng.hpp"

namespace peasi::synth {

namespace {

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> kWords = {
        "time",    "year",    "people",  "way",     "day",     "man",     "thing",   "woman",
        "life",    "child",   "world",   "school",  "state",   "family",  "student", "group",
        "country", "problem", "hand",    "part",    "place",   "case",    "week",    "company",
        "system",  "program", "question","work",    "number",  "night",   "point",   "home",
        "water",   "room",    "mother",  "area",    "money",   "story",   "fact",    "month",
        "lot",     "right",   "study",   "book",    "eye",     "job",     "word",    "business",
        "issue",   "side",    "kind",    "head",    "house",   "service", "friend",  "father",
        "power",   "hour",    "game",    "line",    "end",     "member",  "law",     "car",
        "city",    "community","name",   "president","team",   "minute",  "idea",    "kid",
        "body",    "information","back", "parent",  "face",    "others",  "level",   "office",
        "door",    "health",  "person",  "art",     "war",     "history", "party",   "result",
        "change",  "morning", "reason",  "research","girl",    "guy",     "moment",  "air",
        "teacher", "force",   "education","foot",   "boy",     "age",     "policy",  "process",
        "music",   "market",  "sense",   "nation",  "plan",    "college", "interest","death",
        "experience","effect","use",     "class",   "control", "care",    "field",   "development",
        "role",    "effort",  "rate",    "heart",   "drug",    "show",    "leader",  "light",
        "voice",   "wife",    "price",   "report",  "decision","son",     "view",    "relationship",
    };
    return kWords;
}

std::string marker_name(int index) {
    std::string id = std::to_string(index);
    while (id.size() < 2) id = "0" + id;
    return "qmk" + id;
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 32);
    return s;
}

std::string make_sentence(Rng& rng, int length, const std::string* marker) {
    const auto& words = filler_words();
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) tokens.push_back(words[rng.below(words.size())]);
    if (marker != nullptr)
        tokens[rng.below(tokens.size())] = *marker;
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    out = capitalize(std::move(out));
    out += '.';
    return out;
}

std::string make_question(Rng& rng, int filler_len, const std::string& marker) {
    const auto& words = filler_words();
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(filler_len) + 1);
    for (int i = 0; i < filler_len; ++i) tokens.push_back(words[rng.below(words.size())]);
    tokens.insert(tokens.begin() + static_cast<long>(rng.below(tokens.size() + 1)), marker);
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    out = capitalize(std::move(out));
    out += '?';
    return out;
}

std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s = "0" + s;
    return s;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (n_questions <= 0) throw Error("generator: n_questions must be positive");
    if (positive_rate <= 0.0 || positive_rate > 1.0)
        throw Error("generator: positive_rate must be in (0, 1]");
    if (docs_per_question <= 0 || sentences_per_doc <= 0 || question_len <= 0 ||
        sentence_len <= 0 || marker_pool <= 0)
        throw Error("generator: counts must be positive");
    if (hard_negative_rate < 0.0 || hard_negative_rate > 1.0)
        throw Error("generator: hard_negative_rate must be in [0, 1]");
    if (dev_fraction < 0.0 || test_fraction < 0.0 || dev_fraction + test_fraction >= 1.0)
        throw Error("generator: split fractions must leave room for train");
}

std::vector<corpus::DatasetSplit> generate(const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);

    std::vector<std::string> markers;
    markers.reserve(static_cast<std::size_t>(cfg.marker_pool));
    for (int i = 0; i < cfg.marker_pool; ++i) markers.push_back(marker_name(i));

    const int n_dev = static_cast<int>(std::lround(cfg.n_questions * cfg.dev_fraction));
    const int n_test = static_cast<int>(std::lround(cfg.n_questions * cfg.test_fraction));
    const int n_train = cfg.n_questions - n_dev - n_test;

    std::vector<corpus::DatasetSplit> splits(3);
    splits[0].name = "train";
    splits[1].name = "dev";
    splits[2].name = "test";

    // Expected labeled negatives per question for the target positive rate.
    const double negatives_mean = (1.0 - cfg.positive_rate) / cfg.positive_rate;

    for (int qi = 0; qi < cfg.n_questions; ++qi) {
        auto& split = splits[qi < n_train ? 0 : (qi < n_train + n_dev ? 1 : 2)];
        const std::string question_id = "q" + zero_pad(qi, 4);
        const std::string& marker = markers[rng.below(markers.size())];

        corpus::Question q;
        q.question_id = question_id;
        q.text = make_question(rng, cfg.question_len, marker);
        split.questions.push_back(q);

        // Plant the answer in one sentence of one document.
        const int answer_doc = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.docs_per_question)));
        const int answer_index =
            static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.sentences_per_doc)));

        struct SentenceRef {
            std::string doc_id;
            int index;
            std::string text;
        };
        std::vector<SentenceRef> negatives_pool;
        std::string positive_sent_id, positive_text;

        for (int di = 0; di < cfg.docs_per_question; ++di) {
            corpus::Document doc;
            doc.doc_id = question_id + "-d" + std::to_string(di);
            doc.title = "Document " + std::to_string(di) + " for " + question_id;
            std::vector<std::string> sentences;
            for (int si = 0; si < cfg.sentences_per_doc; ++si) {
                if (di == answer_doc && si == answer_index) {
                    sentences.push_back(make_sentence(rng, cfg.sentence_len, &marker));
                    positive_sent_id = doc.doc_id + ":s" + std::to_string(si);
                    positive_text = sentences.back();
                } else if (rng.uniform() < cfg.hard_negative_rate) {
                    const std::string& other = markers[rng.below(markers.size())];
                    const std::string* distractor = other == marker ? nullptr : &other;
                    sentences.push_back(make_sentence(rng, cfg.sentence_len, distractor));
                    negatives_pool.push_back({doc.doc_id, si, sentences.back()});
                } else {
                    sentences.push_back(make_sentence(rng, cfg.sentence_len, nullptr));
                    negatives_pool.push_back({doc.doc_id, si, sentences.back()});
                }
            }
            for (std::size_t si = 0; si < sentences.size(); ++si) {
                if (si > 0) doc.body += ' ';
                doc.body += sentences[si];
            }
            split.documents.push_back(std::move(doc));
        }

        corpus::QaLabel positive;
        positive.question_id = question_id;
        positive.doc_id = question_id + "-d" + std::to_string(answer_doc);
        positive.sent_id = positive_sent_id;
        positive.text = positive_text;
        positive.label = corpus::SentenceLabel::positive;
        split.qa_labels.push_back(std::move(positive));

        int n_negatives = static_cast<int>(std::floor(negatives_mean));
        if (rng.uniform() < negatives_mean - std::floor(negatives_mean)) ++n_negatives;
        n_negatives = std::min(n_negatives, static_cast<int>(negatives_pool.size()));
        rng.shuffle(negatives_pool);
        for (int i = 0; i < n_negatives; ++i) {
            const auto& ref = negatives_pool[static_cast<std::size_t>(i)];
            corpus::QaLabel neg;
            neg.question_id = question_id;
            neg.doc_id = ref.doc_id;
            neg.sent_id = ref.doc_id + ":s" + std::to_string(ref.index);
            neg.text = ref.text;
            neg.label = corpus::SentenceLabel::negative;
            split.qa_labels.push_back(std::move(neg));
        }
    }
    return splits;
}

}  // namespace peasi::synth
