#include <cmath>

#include <doctest.h>

#include "helpers.hpp"
#include "unirel/error.hpp"
#include "unirel/linalg.hpp"
#include "unirel/reference.hpp"
#include "unirel/relevance.hpp"

using namespace unirel;

namespace {

DecoderParams random_decoder(std::size_t vocab, std::size_t d, Rng& rng) {
  DecoderParams p;
  p.table = EmbeddingTable::init(vocab, d, rng);
  p.w = testutil::random_matrix(d, d, rng);
  p.w_v = testutil::random_matrix(d, d, rng);
  return p;
}

EncodedSequence random_query(const DecoderParams& p, std::size_t n, Rng& rng) {
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < n; ++i)
    ids.push_back(static_cast<TokenId>(kReservedTokens +
                                       rng.uniform_int(p.table.vectors.rows - kReservedTokens)));
  return embed_static(ids, p.table);
}

std::vector<TokenId> random_ids(std::size_t vocab, std::size_t len, Rng& rng) {
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < len; ++i)
    ids.push_back(static_cast<TokenId>(kReservedTokens + rng.uniform_int(vocab - kReservedTokens)));
  return ids;
}

}  // namespace

TEST_CASE("rel_unified examples") {
  const Matrix eye = Matrix::identity(2);
  AlignmentMatrix ones{Matrix(2, 2, 1.0), AlignStrategy::Top1QueryToDoc,
                       AlignDirection::QueryToDoc, 1.0};
  CHECK(rel_unified(eye, eye, ones).value == doctest::Approx(2.0));

  AlignmentMatrix normed = ones;
  normed.z = 4.0;
  CHECK(rel_unified(eye, eye, normed).value == doctest::Approx(0.5));

  AlignmentMatrix bad = ones;
  bad.z = 0.0;
  CHECK_THROWS_AS(rel_unified(eye, eye, bad), Error);
  CHECK_THROWS_AS(rel_unified(Matrix(3, 2), Matrix(4, 2), ones), Error);
}

TEST_CASE("rel_unified equals the brute-force loop oracle") {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.uniform_int(5);
    const std::size_t m = 1 + rng.uniform_int(4);
    const std::size_t n = 1 + rng.uniform_int(4);
    const Matrix dm = testutil::random_matrix(d, m, rng);
    const Matrix qm = testutil::random_matrix(d, n, rng);
    AlignmentMatrix a{testutil::random_matrix(m, n, rng, 0.0, 1.0),
                      AlignStrategy::Top1QueryToDoc, AlignDirection::QueryToDoc,
                      rng.uniform(0.5, 2.0)};
    const RelevanceScore got = rel_unified(dm, qm, a);
    CHECK(got.value == doctest::Approx(ref::rel_unified(dm, qm, a.mat, a.z)).epsilon(1e-12));

    // both marginal decompositions recover the total
    double by_doc = 0.0, by_query = 0.0;
    for (double v : got.doc_contrib) by_doc += v;
    for (double v : got.query_contrib) by_query += v;
    CHECK(std::abs(by_doc - got.value) < 1e-9);
    CHECK(std::abs(by_query - got.value) < 1e-9);
  }
}

TEST_CASE("rel_gr degenerate cases") {
  Rng rng(53);
  const std::size_t d = 4;
  DecoderParams p = random_decoder(12, d, rng);
  const EncodedSequence q = random_query(p, 3, rng);

  // W = 0, W_V = I: every position scores e_{d_i} . mean(q_j)
  DecoderParams uniform = p;
  uniform.w = Matrix(d, d);
  uniform.w_v = Matrix::identity(d);
  const std::vector<TokenId> ids{6, 8};
  const RelevanceScore got = rel_gr(ids, q, uniform);
  std::vector<double> mean(d, 0.0);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t r = 0; r < d; ++r) mean[r] += q.mat.at(r, j) / 3.0;
  double want = 0.0;
  for (TokenId t : ids) want += dot(p.table.vec(t), mean);
  CHECK(got.value == doctest::Approx(want).epsilon(1e-12));

  // single-token identifier, single-token query: e^T W_V q exactly
  const EncodedSequence q1 = random_query(p, 1, rng);
  const RelevanceScore solo = rel_gr(std::vector<TokenId>{7}, q1, p);
  const double expect = dot(p.table.vec(7), matvec(p.w_v, column(q1.mat, 0)));
  CHECK(solo.value == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(rel_gr(std::vector<TokenId>{}, q, p), Error);
}

TEST_CASE("central identity: forward-pass logits equal the unified score") {
  Rng rng(59);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.uniform_int(16);
    const std::size_t m = 1 + rng.uniform_int(8);
    const std::size_t n = 1 + rng.uniform_int(8);
    DecoderParams p = random_decoder(kReservedTokens + 10, d, rng);
    const EncodedSequence q = random_query(p, n, rng);
    const std::vector<TokenId> ids = random_ids(kReservedTokens + 10, m, rng);

    const std::vector<double> logits = gr_forward_logits(ids, q, p);
    double forward = 0.0;
    for (double z : logits) forward += z;
    const RelevanceScore unified = rel_gr(ids, q, p);
    CHECK(std::abs(forward - unified.value) < 1e-9);

    // per-position logits are exactly the document-side contributions
    for (std::size_t i = 0; i < m; ++i)
      CHECK(std::abs(logits[i] - unified.doc_contrib[i]) < 1e-9);
  }
}

TEST_CASE("teacher-forced cross entropy") {
  Rng rng(61);
  const std::size_t d = 4;

  // single-token vocabulary: softmax is degenerate, loss 0 per position
  DecoderParams singleton = random_decoder(1, d, rng);
  EncodedSequence q;
  q.ids = {0};
  q.mask = {1};
  q.mat = testutil::random_matrix(d, 1, rng);
  const CeLoss zero = loss_ce_teacher_forcing(std::vector<TokenId>{0, 0}, q, singleton);
  CHECK(zero.total == doctest::Approx(0.0));

  // all-equal logits: per-position loss is ln |V|
  DecoderParams flat = random_decoder(9, d, rng);
  std::fill(flat.table.vectors.data.begin(), flat.table.vectors.data.end(), 0.25);
  const EncodedSequence fq = random_query(flat, 2, rng);
  const CeLoss equal = loss_ce_teacher_forcing(std::vector<TokenId>{3}, fq, flat);
  CHECK(equal.position_loss[0] == doctest::Approx(std::log(9.0)).epsilon(1e-12));

  // random instance against explicitly materialized logits
  DecoderParams p = random_decoder(14, d, rng);
  const EncodedSequence rq = random_query(p, 3, rng);
  const std::vector<TokenId> ids = random_ids(14, 4, rng);
  const CeLoss got = loss_ce_teacher_forcing(ids, rq, p);

  const std::vector<TokenId> shifted = shift_right(ids);
  double want = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    // alpha_i from the shifted token, h_i, then the full softmax
    std::vector<double> u(3);
    for (std::size_t j = 0; j < 3; ++j)
      u[j] = dot(column(rq.mat, j), matvec(p.w, p.table.vec(shifted[i])));
    const std::vector<double> alpha = softmax_masked(u, rq.mask);
    std::vector<double> qa(d, 0.0);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t r = 0; r < d; ++r) qa[r] += alpha[j] * rq.mat.at(r, j);
    const std::vector<double> h = matvec(p.w_v, qa);
    double denom = 0.0;
    for (std::size_t v = 0; v < 14; ++v)
      denom += std::exp(dot(p.table.vec(static_cast<TokenId>(v)), h));
    want += -dot(p.table.vec(ids[i]), h) + std::log(denom);
  }
  CHECK(got.total == doctest::Approx(want).epsilon(1e-9));

  // sampled-softmax mode restricts the denominator
  const std::vector<TokenId> negs{5, 6};
  const CeLoss sampled = loss_ce_teacher_forcing(ids, rq, p, negs);
  CHECK(sampled.total < got.total + 1e-9);  // smaller candidate set, smaller logsumexp
}

TEST_CASE("tiny logits make CE affine in the target logit") {
  Rng rng(67);
  const std::size_t d = 8, vocab = 100;
  for (double eps : {1e-2, 1e-3}) {
    DecoderParams base = random_decoder(vocab, d, rng);
    const EncodedSequence q = random_query(base, 4, rng);
    const std::vector<TokenId> ids = random_ids(vocab, 3, rng);

    // scale the head so that |s_v| <= eps for every candidate logit; the CE
    // then deviates from (ln V - s_target) by at most max_v |s_v|
    DecoderParams p = base;
    const std::vector<TokenId> shifted = shift_right(ids);
    double max_logit = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::vector<double> u(q.length());
      for (std::size_t j = 0; j < q.length(); ++j)
        u[j] = dot(column(q.mat, j), matvec(p.w, p.table.vec(shifted[i])));
      const std::vector<double> alpha = softmax_masked(u, q.mask);
      std::vector<double> qa(d, 0.0);
      for (std::size_t j = 0; j < q.length(); ++j)
        for (std::size_t r = 0; r < d; ++r) qa[r] += alpha[j] * q.mat.at(r, j);
      const std::vector<double> h = matvec(p.w_v, qa);
      for (std::size_t v = 0; v < vocab; ++v)
        max_logit = std::max(max_logit, std::abs(dot(p.table.vec(static_cast<TokenId>(v)), h)));
    }
    for (double& v : p.w_v.data) v *= eps / max_logit;

    const CeLoss loss = loss_ce_teacher_forcing(ids, q, p);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double affine = std::log(static_cast<double>(vocab)) - loss.target_logit[i];
      CHECK(std::abs(loss.position_loss[i] - affine) <= eps + 1e-12);
    }
  }
}

TEST_CASE("contrastive loss") {
  CHECK(contrastive_from_scores(std::vector<double>{1.7}, 0) == doctest::Approx(0.0));
  CHECK(contrastive_from_scores(std::vector<double>{2.0, 2.0}, 0) ==
        doctest::Approx(std::log(2.0)));

  Rng rng(71);
  const std::vector<double> scores = testutil::random_vector(4, rng);
  const double got = contrastive_from_scores(scores, 2);
  double denom = 0.0;
  for (double s : scores) denom += std::exp(s);
  CHECK(got == doctest::Approx(-std::log(std::exp(scores[2]) / denom)).epsilon(1e-12));

  CHECK_THROWS_AS(contrastive_from_scores(std::vector<double>{}, 0), Error);

  // pairwise helper over encoded sequences
  const std::size_t d = 4;
  DecoderParams p = random_decoder(12, d, rng);
  const EncodedSequence q = random_query(p, 2, rng);
  const EncodedSequence pos = random_query(p, 3, rng);
  std::vector<EncodedSequence> negs{random_query(p, 3, rng), random_query(p, 3, rng)};
  const double loss = loss_contrastive(pos, q, AlignStrategy::Top1QueryToDoc, negs);
  std::vector<double> all{rel_unified(pos.mat, q.mat, align_top1_q2d(pos, q)).value,
                          rel_unified(negs[0].mat, q.mat, align_top1_q2d(negs[0], q)).value,
                          rel_unified(negs[1].mat, q.mat, align_top1_q2d(negs[1], q)).value};
  CHECK(loss == doctest::Approx(contrastive_from_scores(all, 0)).epsilon(1e-12));
}

TEST_CASE("pawa relevance") {
  Rng rng(73);
  const std::size_t d = 3, vocab = 10;
  DecoderParams p = random_decoder(vocab, d, rng);
  const EncodedSequence q = random_query(p, 3, rng);
  const std::vector<TokenId> ids = random_ids(vocab, 2, rng);

  // identity projections with embedding latents collapse to plain relevance
  const PawaBank eye = PawaBank::identity(2, vocab, d);
  const Matrix latents = embed_static(ids, p.table).mat;
  const RelevanceScore collapsed = rel_pawa(ids, q, p, eye, latents);
  const RelevanceScore plain = rel_gr(ids, q, p);
  CHECK(std::abs(collapsed.value - plain.value) < 1e-9);

  // zero latents, zero score
  const RelevanceScore dead = rel_pawa(ids, q, p, eye, Matrix(d, 2));
  CHECK(dead.value == 0.0);

  // random bank against the direct logit oracle d'_i^T E_{i,d_i}^T h_i
  const PawaBank bank = PawaBank::init(2, vocab, d, rng);
  const Matrix lat = testutil::random_matrix(d, 2, rng);
  const RelevanceScore got = rel_pawa(ids, q, p, bank, lat);
  const std::vector<TokenId> shifted = shift_right(ids);
  double want = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<double> u(3);
    for (std::size_t j = 0; j < 3; ++j)
      u[j] = dot(column(q.mat, j), matvec(p.w, p.table.vec(shifted[i])));
    const std::vector<double> alpha = softmax_masked(u, q.mask);
    std::vector<double> qa(d, 0.0);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t r = 0; r < d; ++r) qa[r] += alpha[j] * q.mat.at(r, j);
    const std::vector<double> h = matvec(p.w_v, qa);
    want += dot(bank.apply(i, ids[i], column(lat, i)), h);
  }
  CHECK(got.value == doctest::Approx(want).epsilon(1e-9));

  CHECK_THROWS_AS(rel_pawa(random_ids(vocab, 3, rng), q, p, eye, latents), Error);
}

TEST_CASE("np relevance") {
  Rng rng(79);
  const std::size_t d = 3, vocab = 10;
  DecoderParams p = random_decoder(vocab, d, rng);
  const EncodedSequence q = random_query(p, 2, rng);
  const std::vector<TokenId> ids = random_ids(vocab, 3, rng);

  // a store holding raw embeddings equals plain relevance with W_V = I
  const Matrix stored = embed_static(ids, p.table).mat;
  DecoderParams identity_v = p;
  identity_v.w_v = Matrix::identity(d);
  const RelevanceScore via_np = rel_np(ids, stored, q, p);
  const RelevanceScore via_gr = rel_gr(ids, q, identity_v);
  CHECK(std::abs(via_np.value - via_gr.value) < 1e-9);

  CHECK(rel_np(ids, Matrix(d, 3), q, p).value == 0.0);

  // brute-force loop oracle
  const Matrix contextual = testutil::random_matrix(d, 3, rng);
  const RelevanceScore got = rel_np(ids, contextual, q, p);
  const EncodedSequence shifted = embed_static(shift_right(ids), p.table);
  const AlignmentMatrix a = align_attention(shifted, q, p.w);
  CHECK(got.value == doctest::Approx(ref::rel_unified(contextual, q.mat, a.mat, 1.0)).epsilon(1e-12));

  CHECK_THROWS_AS(rel_np(ids, Matrix(d, 2), q, p), Error);
}

TEST_CASE("kernel feature map and trace identity") {
  // phi = elu + 1
  const std::vector<double> x{1.0, 0.0, -1.0};
  const std::vector<double> phi = feature_map_elu1(x);
  CHECK(phi[0] == doctest::Approx(2.0));
  CHECK(phi[1] == doctest::Approx(1.0));
  CHECK(phi[2] == doctest::Approx(std::exp(-1.0)));

  // worked example: d = q = (1, 0) gives trace 5 on both routes
  const std::vector<double> e1{1.0, 0.0};
  const Matrix f = feature_outer(e1);
  double direct = 0.0;
  for (std::size_t i = 0; i < f.rows; ++i)
    for (std::size_t j = 0; j < f.cols; ++j) direct += f.at(i, j) * f.at(i, j);
  CHECK(direct == doctest::Approx(5.0));
  const double factored = dot(e1, e1) * dot(feature_map_elu1(e1), feature_map_elu1(e1));
  CHECK(factored == doctest::Approx(5.0));

  // orthogonal vectors: both sides vanish
  const std::vector<double> e2{0.0, 1.0};
  const Matrix f2 = feature_outer(e2);
  double cross = 0.0;
  for (std::size_t i = 0; i < f.rows; ++i)
    for (std::size_t j = 0; j < f.cols; ++j) cross += f.at(i, j) * f2.at(i, j);
  CHECK(cross == doctest::Approx(0.0));
}

TEST_CASE("trace identity and cauchy-schwarz bound on random pairs") {
  Rng rng(83);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + rng.uniform_int(32);
    const std::vector<double> dv = testutil::random_vector(d, rng, -2.0, 2.0);
    const std::vector<double> qv = testutil::random_vector(d, rng, -2.0, 2.0);

    // explicit F-matrix oracle
    const Matrix fd = feature_outer(dv);
    const Matrix fq = feature_outer(qv);
    double trace = 0.0;
    for (std::size_t i = 0; i < fd.rows; ++i)
      for (std::size_t j = 0; j < fd.cols; ++j) trace += fd.at(i, j) * fq.at(i, j);
    const double factored = dot(dv, qv) * dot(feature_map_elu1(dv), feature_map_elu1(qv));
    CHECK(std::abs(trace - factored) < 1e-9);

    double self_d = 0.0, self_q = 0.0;
    for (double v : fd.data) self_d += v * v;
    for (double v : fq.data) self_q += v * v;
    CHECK(trace <= std::sqrt(self_d) * std::sqrt(self_q) + 1e-12);
  }
}

TEST_CASE("kernelized relevance uses positive row normalizers") {
  Rng rng(89);
  const Matrix d = testutil::random_matrix(4, 3, rng);
  const Matrix q = testutil::random_matrix(4, 2, rng);
  const KernelizedScore ks = rel_kernelized(d, q);
  CHECK(ks.bound_holds);
  CHECK(ks.max_violation <= 0.0);

  // hand-rolled: sum_ij (d_i.q_j)(phi_d.phi_q) / p_i
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::vector<double> di = column(d, i);
    const std::vector<double> phi_d = feature_map_elu1(di);
    double p = 0.0;
    for (std::size_t j = 0; j < 2; ++j) p += dot(phi_d, feature_map_elu1(column(q, j)));
    for (std::size_t j = 0; j < 2; ++j) {
      const std::vector<double> qj = column(q, j);
      want += dot(di, qj) * dot(phi_d, feature_map_elu1(qj)) / p;
    }
  }
  CHECK(ks.value == doctest::Approx(want).epsilon(1e-12));
}
