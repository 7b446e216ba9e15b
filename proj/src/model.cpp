#include "peasi/model.hpp"

#include <fstream>

#include "peasi/errors.hpp"

namespace peasi::model {

using nlohmann::json;

Encoder& TrainedModel::pr_enc() {
    if (!encoder) throw Error("model has no encoder");
    return *encoder;
}

Encoder& TrainedModel::easi_enc() {
    if (easi_encoder) return *easi_encoder;
    return pr_enc();
}

std::vector<nd::Parameter*> TrainedModel::all_params() {
    std::vector<nd::Parameter*> out;
    const auto append = [&](std::vector<nd::Parameter*> ps) {
        out.insert(out.end(), ps.begin(), ps.end());
    };
    if (encoder) append(encoder->params());
    if (easi_encoder) append(easi_encoder->params());
    if (pr_head) append(pr_head->params());
    if (easi_head) append(easi_head->params());
    if (fusion_head) append(fusion_head->params());
    return out;
}

namespace {

json tensor_to_json(const nd::Tensor& t) {
    return json{{"shape", {t.rows(), t.cols()}}, {"values", t.values()}};
}

nd::Tensor tensor_from_json(const json& j) {
    const auto shape = j.at("shape");
    nd::Tensor t(shape.at(0).get<int>(), shape.at(1).get<int>());
    const auto& values = j.at("values");
    if (values.size() != t.size())
        throw ShapeMismatch("checkpoint tensor has " + std::to_string(values.size()) +
                            " values for shape " + nd::shape_string(t));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = values.at(i).get<double>();
    return t;
}

json encoder_config_to_json(const EncoderConfig& c) {
    return json{{"d_model", c.d_model},     {"n_heads", c.n_heads},
                {"n_layers", c.n_layers},   {"d_ff", c.d_ff},
                {"max_seq_len", c.max_seq_len}, {"vocab_size", c.vocab_size},
                {"dropout", c.dropout}};
}

EncoderConfig encoder_config_from_json(const json& j) {
    EncoderConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

}  // namespace

void save_model(TrainedModel& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json params = json::object();
    for (nd::Parameter* p : m.all_params()) params[p->name] = tensor_to_json(p->value);
    json j{{"format_version", 1},
           {"kind", "peasi-model"},
           {"mode", m.mode},
           {"encoder_config", encoder_config_to_json(m.enc_cfg)},
           {"k_max", m.k_max},
           {"has_easi_encoder", m.easi_encoder != nullptr},
           {"has_pr_head", m.pr_head.has_value()},
           {"has_easi_head", m.easi_head.has_value()},
           {"has_fusion_head", m.fusion_head.has_value()},
           {"config", m.config_snapshot},
           {"final_metrics", m.final_metrics},
           {"params", params}};
    std::ofstream out(dir / "model.json");
    if (!out) throw Error("cannot write " + (dir / "model.json").string());
    out << j.dump() << '\n';
    m.vocab.save(dir / "vocab.tsv");
}

TrainedModel load_model(const std::filesystem::path& dir) {
    const auto file = dir / "model.json";
    std::ifstream in(file);
    if (!in) throw MissingCheckpoint("cannot read checkpoint " + file.string());
    json j;
    in >> j;
    if (j.value("kind", "") != "peasi-model")
        throw Error(file.string() + " is not a model checkpoint");

    TrainedModel m;
    m.mode = j.at("mode").get<std::string>();
    m.enc_cfg = encoder_config_from_json(j.at("encoder_config"));
    m.k_max = j.at("k_max").get<int>();
    m.config_snapshot = j.value("config", json::object());
    m.final_metrics = j.value("final_metrics", json::object());
    m.vocab = text::Vocabulary::load(dir / "vocab.tsv");

    // Structure is rebuilt with a throwaway seed; every value is then
    // overwritten from the checkpoint.
    Rng rng(0);
    m.encoder = std::make_unique<Encoder>(m.enc_cfg, rng, "enc");
    if (j.at("has_easi_encoder").get<bool>())
        m.easi_encoder = std::make_unique<Encoder>(m.enc_cfg, rng, "easi_enc");
    if (j.at("has_pr_head").get<bool>()) m.pr_head.emplace(m.enc_cfg.d_model, rng, "head/pr");
    if (j.at("has_easi_head").get<bool>())
        m.easi_head.emplace(m.k_max, m.enc_cfg.d_model, rng, "head/easi");
    if (j.at("has_fusion_head").get<bool>())
        m.fusion_head.emplace(m.enc_cfg.d_model, rng, "head/fusion");

    const auto& params = j.at("params");
    for (nd::Parameter* p : m.all_params()) {
        if (!params.contains(p->name)) throw MissingCheckpoint("checkpoint lacks tensor " + p->name);
        nd::Tensor t = tensor_from_json(params.at(p->name));
        if (!t.same_shape(p->value))
            throw ShapeMismatch("checkpoint tensor " + p->name + " has shape " + nd::shape_string(t) +
                                ", expected " + nd::shape_string(p->value));
        p->value = std::move(t);
    }
    return m;
}

EncodedPassage encode_passage(const text::Vocabulary& vocab,
                              const std::vector<std::string>& question_tokens,
                              const corpus::Passage& p, int max_seq_len, int k_max) {
    EncodedPassage enc;
    const auto flat = corpus::passage_flat_tokens(p);
    enc.pr_seq = text::encode_pair(question_tokens, flat, vocab,
                                   static_cast<std::size_t>(max_seq_len));
    auto sentence_tokens = corpus::passage_sentence_tokens(p);
    if (static_cast<int>(sentence_tokens.size()) > k_max)
        sentence_tokens.resize(static_cast<std::size_t>(k_max));
    enc.sentence_count = static_cast<int>(sentence_tokens.size());
    enc.easi_seq = text::encode_multi(question_tokens, sentence_tokens, vocab,
                                      static_cast<std::size_t>(max_seq_len));
    return enc;
}

double score_passage(TrainedModel& m, const EncodedPassage& enc) {
    nd::Tape tape(false);
    if (m.mode == "mtl1_fuse") {
        if (!m.fusion_head) throw ModeMismatch("mtl1_fuse model without fusion head");
        const auto e_pr = m.pr_enc().encode(tape, enc.pr_seq);
        const auto e_easi = m.easi_enc().encode(tape, enc.easi_seq);
        return fusion_score(tape, *m.fusion_head, e_pr, e_easi);
    }
    if (!m.pr_head) throw ModeMismatch("model of mode " + m.mode + " cannot score passages");
    const auto e = m.pr_enc().encode(tape, enc.pr_seq);
    return pr_score(tape, *m.pr_head, e);
}

double score_sentence(TrainedModel& m, const text::TokenSequence& seq) {
    if (!m.pr_head) throw ModeMismatch("model of mode " + m.mode + " cannot score sentences");
    nd::Tape tape(false);
    const auto e = m.pr_enc().encode(tape, seq);
    return pr_score(tape, *m.pr_head, e);
}

EasiExtraction extract_answer(TrainedModel& m, const EncodedPassage& enc) {
    if (!m.easi_head) throw ModeMismatch("model of mode " + m.mode + " cannot extract answers");
    nd::Tape tape(false);
    const auto e = m.easi_enc().encode(tape, enc.easi_seq);
    return easi_extract(tape, *m.easi_head, e, enc.sentence_count);
}

}  // namespace peasi::model
