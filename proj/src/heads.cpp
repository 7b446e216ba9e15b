#include "peasi/heads.hpp"

#include "peasi/errors.hpp"

namespace peasi::model {

namespace {

nd::Tensor init_weight(int rows, int cols, Rng& rng) {
    nd::Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.trunc_normal(0.02);
    return t;
}

int check_label(int label) {
    if (label != 0 && label != 1) throw Error("binary label must be 0 or 1");
    return label;
}

}  // namespace

BinaryHead::BinaryHead(int d_model, Rng& rng, const std::string& prefix)
    : w(prefix + "/w", init_weight(d_model, 2, rng)), b(prefix + "/b", nd::Tensor(1, 2)) {}

nd::Tape::Id BinaryHead::logits(nd::Tape& tape, nd::Tape::Id e) {
    return tape.add(tape.matmul(e, tape.param(w)), tape.param(b));
}

EasiHead::EasiHead(int k_max, int d_model, Rng& rng, const std::string& prefix)
    : w(prefix + "/w", init_weight(k_max, d_model, rng)) {}

nd::Tape::Id EasiHead::logits(nd::Tape& tape, nd::Tape::Id e) {
    return tape.matmul_nt(e, tape.param(w));
}

FusionHead::FusionHead(int d_model, Rng& rng, const std::string& prefix)
    : w(prefix + "/w", init_weight(2, 2 * d_model, rng)), b(prefix + "/b", nd::Tensor(1, 2)) {}

nd::Tape::Id FusionHead::logits(nd::Tape& tape, nd::Tape::Id e_pr, nd::Tape::Id e_easi) {
    const auto& pr = tape.value(e_pr);
    const auto& easi = tape.value(e_easi);
    if (pr.cols() != easi.cols() || pr.cols() * 2 != w.value.cols())
        throw WidthMismatch("fusion expects two 1x" + std::to_string(w.value.cols() / 2) +
                            " embeddings, got " + nd::shape_string(pr) + " and " +
                            nd::shape_string(easi));
    const auto fused = tape.tanh_of(tape.concat_cols(e_pr, e_easi));
    return tape.add(tape.matmul_nt(fused, tape.param(w)), tape.param(b));
}

double pr_score(nd::Tape& tape, BinaryHead& head, nd::Tape::Id e) {
    const auto probs = tape.softmax_rows(head.logits(tape, e));
    return tape.value(probs)(0, 1);
}

nd::Tape::Id pr_loss(nd::Tape& tape, BinaryHead& head, nd::Tape::Id e, int label) {
    return tape.cross_entropy(head.logits(tape, e), check_label(label), 2);
}

EasiExtraction easi_extract(nd::Tape& tape, EasiHead& head, nd::Tape::Id e, int m) {
    const int k = head.k_max();
    if (m < 1 || m > k)
        throw InvalidCount("sentence count " + std::to_string(m) + " outside [1, " +
                           std::to_string(k) + "]");
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < m; ++i) keep[static_cast<std::size_t>(i)] = 1;
    const auto probs = tape.softmax_rows(head.logits(tape, e), &keep);
    EasiExtraction out;
    out.probs = tape.value(probs).values();
    out.argmax = 0;
    for (int i = 1; i < m; ++i)
        if (out.probs[static_cast<std::size_t>(i)] > out.probs[static_cast<std::size_t>(out.argmax)])
            out.argmax = i;
    return out;
}

nd::Tape::Id easi_loss(nd::Tape& tape, EasiHead& head, nd::Tape::Id e, int m, int gold) {
    const int k = head.k_max();
    if (m < 1 || m > k)
        throw InvalidCount("sentence count " + std::to_string(m) + " outside [1, " +
                           std::to_string(k) + "]");
    if (gold < 0 || gold >= m)
        throw GoldOutOfRange("gold index " + std::to_string(gold) + " outside [0, " +
                             std::to_string(m) + ")");
    return tape.cross_entropy(head.logits(tape, e), gold, m);
}

double fusion_score(nd::Tape& tape, FusionHead& head, nd::Tape::Id e_pr, nd::Tape::Id e_easi) {
    const auto probs = tape.softmax_rows(head.logits(tape, e_pr, e_easi));
    return tape.value(probs)(0, 1);
}

nd::Tape::Id fusion_loss(nd::Tape& tape, FusionHead& head, nd::Tape::Id e_pr, nd::Tape::Id e_easi,
                         int label) {
    return tape.cross_entropy(head.logits(tape, e_pr, e_easi), check_label(label), 2);
}

}  // namespace peasi::model
