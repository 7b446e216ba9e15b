#include "peasi/encoder.hpp"

#include <cmath>

#include "peasi/errors.hpp"

namespace peasi::model {

void EncoderConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0 || max_seq_len < 4)
        throw Error("encoder config: dimensions must be positive and max_seq_len >= 4");
    if (d_model % n_heads != 0)
        throw Error("encoder config: d_model " + std::to_string(d_model) +
                    " not divisible by n_heads " + std::to_string(n_heads));
    if (vocab_size <= 0) throw Error("encoder config: vocab_size must be set");
}

namespace {

nd::Tensor init_weight(int rows, int cols, Rng& rng) {
    nd::Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.trunc_normal(0.02);
    return t;
}

nd::Tensor const_row(int cols, double value) {
    nd::Tensor t(1, cols);
    t.fill(value);
    return t;
}

}  // namespace

Encoder::Encoder(const EncoderConfig& cfg, Rng& rng, const std::string& prefix)
    : cfg_(cfg), prefix_(prefix) {
    cfg_.validate();
    const int d = cfg_.d_model;
    tok_emb_ = nd::Parameter(prefix_ + "/tok_emb", init_weight(cfg_.vocab_size, d, rng));
    seg_emb_ = nd::Parameter(prefix_ + "/seg_emb", init_weight(2, d, rng));
    pos_emb_ = nd::Parameter(prefix_ + "/pos_emb", init_weight(cfg_.max_seq_len, d, rng));
    layers_.reserve(static_cast<std::size_t>(cfg_.n_layers));
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const std::string lp = prefix_ + "/" + std::to_string(l) + "/";
        Layer layer;
        layer.wq = nd::Parameter(lp + "wq", init_weight(d, d, rng));
        layer.bq = nd::Parameter(lp + "bq", nd::Tensor(1, d));
        layer.wk = nd::Parameter(lp + "wk", init_weight(d, d, rng));
        layer.bk = nd::Parameter(lp + "bk", nd::Tensor(1, d));
        layer.wv = nd::Parameter(lp + "wv", init_weight(d, d, rng));
        layer.bv = nd::Parameter(lp + "bv", nd::Tensor(1, d));
        layer.wo = nd::Parameter(lp + "wo", init_weight(d, d, rng));
        layer.bo = nd::Parameter(lp + "bo", nd::Tensor(1, d));
        layer.ln1_gain = nd::Parameter(lp + "ln1_gain", const_row(d, 1.0));
        layer.ln1_bias = nd::Parameter(lp + "ln1_bias", nd::Tensor(1, d));
        layer.w1 = nd::Parameter(lp + "w1", init_weight(d, cfg_.d_ff, rng));
        layer.b1 = nd::Parameter(lp + "b1", nd::Tensor(1, cfg_.d_ff));
        layer.w2 = nd::Parameter(lp + "w2", init_weight(cfg_.d_ff, d, rng));
        layer.b2 = nd::Parameter(lp + "b2", nd::Tensor(1, d));
        layer.ln2_gain = nd::Parameter(lp + "ln2_gain", const_row(d, 1.0));
        layer.ln2_bias = nd::Parameter(lp + "ln2_bias", nd::Tensor(1, d));
        layers_.push_back(std::move(layer));
    }
}

nd::Tape::Id Encoder::encode(nd::Tape& tape, const text::TokenSequence& seq) {
    const int n = static_cast<int>(seq.ids.size());
    if (n == 0) throw Error("encode: empty sequence");
    if (n > cfg_.max_seq_len)
        throw SequenceTooLong("sequence of " + std::to_string(n) + " tokens exceeds max_seq_len " +
                              std::to_string(cfg_.max_seq_len));
    for (const int id : seq.ids)
        if (id < 0 || id >= cfg_.vocab_size)
            throw IdOutOfRange("token id " + std::to_string(id) + " outside vocabulary of " +
                               std::to_string(cfg_.vocab_size));
    if (seq.segments.size() != seq.ids.size() || seq.positions.size() != seq.ids.size())
        throw ShapeMismatch("token sequence channels of unequal length");

    // Attention ignores [PAD] keys in every layer, so E is independent of any
    // padded tail.
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(n), 1);
    for (int i = 0; i < n; ++i)
        if (seq.ids[static_cast<std::size_t>(i)] == text::Vocabulary::kPad)
            keep[static_cast<std::size_t>(i)] = 0;

    const auto tok = tape.embedding_rows(tape.param(tok_emb_), seq.ids);
    const auto seg = tape.embedding_rows(tape.param(seg_emb_), seq.segments);
    const auto pos = tape.embedding_rows(tape.param(pos_emb_), seq.positions);
    auto x = tape.add(tape.add(tok, seg), pos);

    const int d = cfg_.d_model;
    const int dh = d / cfg_.n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (auto& layer : layers_) {
        const auto q = tape.add_rowvec(tape.matmul(x, tape.param(layer.wq)), tape.param(layer.bq));
        const auto k = tape.add_rowvec(tape.matmul(x, tape.param(layer.wk)), tape.param(layer.bk));
        const auto v = tape.add_rowvec(tape.matmul(x, tape.param(layer.wv)), tape.param(layer.bv));

        nd::Tape::Id heads = -1;
        for (int h = 0; h < cfg_.n_heads; ++h) {
            const auto qh = tape.slice_cols(q, h * dh, dh);
            const auto kh = tape.slice_cols(k, h * dh, dh);
            const auto vh = tape.slice_cols(v, h * dh, dh);
            const auto scores = tape.scale(tape.matmul_nt(qh, kh), att_scale);
            const auto probs = tape.softmax_rows(scores, &keep);
            const auto oh = tape.matmul(probs, vh);
            heads = h == 0 ? oh : tape.concat_cols(heads, oh);
        }
        const auto attn =
            tape.add_rowvec(tape.matmul(heads, tape.param(layer.wo)), tape.param(layer.bo));
        x = tape.layer_norm(tape.add(x, attn), tape.param(layer.ln1_gain),
                            tape.param(layer.ln1_bias));

        const auto ff1 =
            tape.gelu(tape.add_rowvec(tape.matmul(x, tape.param(layer.w1)), tape.param(layer.b1)));
        const auto ff2 = tape.add_rowvec(tape.matmul(ff1, tape.param(layer.w2)), tape.param(layer.b2));
        x = tape.layer_norm(tape.add(x, ff2), tape.param(layer.ln2_gain),
                            tape.param(layer.ln2_bias));
    }
    return tape.row(x, 0);
}

std::vector<double> Encoder::embed(const text::TokenSequence& seq) {
    nd::Tape tape(false);
    const auto e = encode(tape, seq);
    return tape.value(e).values();
}

std::vector<nd::Parameter*> Encoder::params() {
    std::vector<nd::Parameter*> out{&tok_emb_, &seg_emb_, &pos_emb_};
    for (auto& l : layers_) {
        for (nd::Parameter* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                                 &l.ln1_gain, &l.ln1_bias, &l.w1, &l.b1, &l.w2, &l.b2,
                                 &l.ln2_gain, &l.ln2_bias})
            out.push_back(p);
    }
    return out;
}

}  // namespace peasi::model
