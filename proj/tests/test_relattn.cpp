#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "txl/relattn.hpp"

using namespace txl;
using namespace txl::relattn;
using testsupport::check_gradient;
using testsupport::random_tensor;

TEST_CASE("sinusoid table: distance zero row and direct values") {
  Tensor table = sinusoid_table(4, 6);
  // Row 0 alternates sin 0 = 0, cos 0 = 1.
  for (int j = 0; j < 6; j += 2) {
    CHECK(table.at(0, j) == 0.0);
    CHECK(table.at(0, j + 1) == 1.0);
  }
  // d = 2: row 1 is [sin 1, cos 1].
  Tensor narrow = sinusoid_table(2, 2);
  CHECK(narrow.at(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  CHECK(narrow.at(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
  CHECK(narrow.at(1, 0) == doctest::Approx(0.8414709848).epsilon(1e-9));
  CHECK(narrow.at(1, 1) == doctest::Approx(0.5403023059).epsilon(1e-9));

  CHECK_THROWS_AS(sinusoid_table(4, 5), ConfigError);
}

TEST_CASE("sinusoid table: extension never changes existing rows") {
  Tensor small = sinusoid_table(8, 10);
  Tensor big = sinusoid_table(16, 10);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 10; ++j) {
      CHECK(small.at(i, j) == big.at(i, j));  // bit-identical
    }
  }
  // The cache grows the same way.
  const Tensor& cached = sinusoid_cache(10, 8);
  const std::vector<double> before(cached.data->begin(), cached.data->begin() + 8 * 10);
  const Tensor& grown = sinusoid_cache(10, 500);
  REQUIRE(grown.rows() >= 500);
  for (int i = 0; i < 8 * 10; ++i) CHECK((*grown.data)[i] == before[i]);
}

TEST_CASE("rel_shift: row structure") {
  // L = 2, M = 1 symbolic example: [[a,b,c],[x,y,z]] -> [[b,c,0],[x,y,z]].
  Tensor in = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor out = rel_shift(in);
  CHECK(out.at(0, 0) == 2.0);
  CHECK(out.at(0, 1) == 3.0);
  CHECK(out.at(0, 2) == 0.0);
  CHECK(out.at(1, 0) == 4.0);
  CHECK(out.at(1, 1) == 5.0);
  CHECK(out.at(1, 2) == 6.0);

  // L = 1 is the identity shift.
  Tensor row = Tensor::from({1, 4}, {7, 8, 9, 10});
  Tensor same = rel_shift(row);
  CHECK(*same.data == *row.data);
}

TEST_CASE("rel_shift: index formula property") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int seg_len = 1 + static_cast<int>(rng.uniform_int(8));
    const int mem_len = static_cast<int>(rng.uniform_int(8));
    const int span = mem_len + seg_len;
    Tensor in = random_tensor({seg_len, span}, rng);
    Tensor out = rel_shift(in);
    for (int i = 0; i < seg_len; ++i) {
      for (int k = 0; k < span; ++k) {
        if (k <= mem_len + i) {
          CHECK(out.at(i, k) == in.at(i, k + seg_len - 1 - i));
        } else {
          // Everything past the causal window is exactly zero.
          CHECK(out.at(i, k) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("rel_shift gradient") {
  Rng rng(5);
  Tensor in = random_tensor({3, 7}, rng, true);
  Tensor mixer = random_tensor({3, 7}, rng);
  check_gradient(in, [&] { return ops::sum(ops::mul(rel_shift(in), mixer)); });
}

TEST_CASE("rel_scores_naive: closed-form cases") {
  Rng rng(7);
  const int d = 6, d_head = 3;
  Tensor table = sinusoid_table(16, d);

  // u = v = 0 and zero distance projection leave plain content scores.
  {
    const int seg_len = 3, mem_len = 2;
    Tensor q = random_tensor({seg_len, d_head}, rng);
    Tensor keys = random_tensor({mem_len + seg_len, d_head}, rng);
    Tensor wkr0 = Tensor::zeros({d, d_head});
    Tensor zero = Tensor::zeros({1, d_head});
    Tensor scores = rel_scores_naive(q, keys, table, wkr0, zero, zero);
    for (int i = 0; i < seg_len; ++i) {
      for (int j = 0; j <= mem_len + i; ++j) {
        double content = 0.0;
        for (int c = 0; c < d_head; ++c) content += q.at(i, c) * keys.at(j, c);
        CHECK(scores.at(i, j) == doctest::Approx(content).epsilon(1e-12));
      }
    }
  }

  // L = 1, M = 0: the single score is q0.k0 + q0.(Wkr R0) + u.k0 + v.(Wkr R0).
  {
    Tensor q = random_tensor({1, d_head}, rng);
    Tensor keys = random_tensor({1, d_head}, rng);
    Tensor wkr = random_tensor({d, d_head}, rng);
    Tensor u = random_tensor({1, d_head}, rng);
    Tensor v = random_tensor({1, d_head}, rng);
    Tensor scores = rel_scores_naive(q, keys, table, wkr, u, v);
    std::vector<double> proj(d_head, 0.0);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d_head; ++c) proj[c] += table.at(0, r) * wkr.at(r, c);
    }
    double expected = 0.0;
    for (int c = 0; c < d_head; ++c) {
      expected += q.at(0, c) * keys.at(0, c) + q.at(0, c) * proj[c] + u.at(0, c) * keys.at(0, c) +
                  v.at(0, c) * proj[c];
    }
    CHECK(scores.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("rel_scores_fast: zero q and zero v leave rows constant in i") {
  Rng rng(9);
  const int d = 8, d_head = 4, seg_len = 4, mem_len = 3;
  Tensor table = sinusoid_table(mem_len + seg_len, d);
  Tensor q = Tensor::zeros({seg_len, d_head});
  Tensor keys = random_tensor({mem_len + seg_len, d_head}, rng);
  Tensor wkr = random_tensor({d, d_head}, rng);
  Tensor u = random_tensor({1, d_head}, rng);
  Tensor v = Tensor::zeros({1, d_head});
  Tensor scores = rel_scores_fast(q, keys, table, wkr, u, v);
  // Only term (c) = u.k_j survives, independent of the query row.
  for (int j = 0; j <= mem_len; ++j) {  // inside every row's window
    for (int i = 1; i < seg_len; ++i) {
      CHECK(scores.at(i, j) == doctest::Approx(scores.at(0, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ORACLE EQUIVALENCE: fast path equals the pairwise oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int seg_len = 1 + static_cast<int>(rng.uniform_int(16));
    const int mem_len = static_cast<int>(rng.uniform_int(17));
    const int d_head = 2 << rng.uniform_int(3);  // 2, 4, 8
    const int d = d_head * 2;
    Tensor table = sinusoid_table(mem_len + seg_len, d);
    Tensor q = random_tensor({seg_len, d_head}, rng);
    Tensor keys = random_tensor({mem_len + seg_len, d_head}, rng);
    Tensor wkr = random_tensor({d, d_head}, rng);
    Tensor u = random_tensor({1, d_head}, rng);
    Tensor v = random_tensor({1, d_head}, rng);

    Tensor naive = rel_scores_naive(q, keys, table, wkr, u, v);
    Tensor fast = rel_scores_fast(q, keys, table, wkr, u, v);
    for (int i = 0; i < seg_len; ++i) {
      for (int j = 0; j <= mem_len + i; ++j) {
        CHECK(std::abs(naive.at(i, j) - fast.at(i, j)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("distance-projection counts: pairwise oracle is quadratic in the span") {
  Rng rng(13);
  const int d = 8, d_head = 4;
  auto count_naive = [&](int seg_len, int mem_len) {
    Tensor table = sinusoid_table(mem_len + seg_len, d);
    Tensor q = random_tensor({seg_len, d_head}, rng);
    Tensor keys = random_tensor({mem_len + seg_len, d_head}, rng);
    Tensor wkr = random_tensor({d, d_head}, rng);
    Tensor u = random_tensor({1, d_head}, rng);
    Tensor v = random_tensor({1, d_head}, rng);
    std::uint64_t count = 0;
    (void)rel_scores_naive(q, keys, table, wkr, u, v, &count);
    return count;
  };
  // One projection per causally valid pair: L*M + L(L+1)/2.
  CHECK(count_naive(16, 16) == 16 * 16 + 16 * 17 / 2);
  // Doubling the span (segment scaling along) quadruples the count, while
  // the fast path runs one projection per distance: span many, linear.
  CHECK(count_naive(32, 32) == 32 * 32 + 32 * 33 / 2);
}

TEST_CASE("rel_scores_fast gradients match finite differences") {
  Rng rng(17);
  const int d = 6, d_head = 3, seg_len = 3, mem_len = 2;
  Tensor table = sinusoid_table(mem_len + seg_len, d);
  Tensor q = random_tensor({seg_len, d_head}, rng, true);
  Tensor keys = random_tensor({mem_len + seg_len, d_head}, rng, true);
  Tensor wkr = random_tensor({d, d_head}, rng, true);
  Tensor u = random_tensor({1, d_head}, rng, true);
  Tensor v = random_tensor({1, d_head}, rng, true);
  Tensor mixer = random_tensor({seg_len, mem_len + seg_len}, rng);
  auto loss = [&] {
    return ops::sum(ops::mul(rel_scores_fast(q, keys, table, wkr, u, v), mixer));
  };
  check_gradient(q, loss);
  check_gradient(keys, loss);
  check_gradient(wkr, loss);
  check_gradient(u, loss);
  check_gradient(v, loss);
}

TEST_CASE("abs_scores: baseline behaviour and its failure mode") {
  Rng rng(19);
  const int d = 6, seg_len = 3;

  AbsAttnParams params;
  params.wq = random_tensor({d, d}, rng);
  params.wk = random_tensor({d, d}, rng);

  // U = 0 leaves pure content attention.
  {
    Tensor u0 = Tensor::zeros({seg_len, d});
    Tensor q_in = random_tensor({seg_len, d}, rng);
    Tensor ext = random_tensor({2 * seg_len, d}, rng);
    Tensor scores = abs_scores(q_in, ext, params, u0);
    Tensor content = ops::matmul_nt(ops::matmul(q_in, params.wq), ops::matmul(ext, params.wk));
    for (int i = 0; i < seg_len; ++i) {
      for (int j = 0; j < 2 * seg_len; ++j) {
        CHECK(scores.at(i, j) == doctest::Approx(content.at(i, j)).epsilon(1e-12));
      }
    }
  }

  const Tensor u_table = sinusoid_table(seg_len, d);

  // Identical content in the cached block and the current block produces
  // identical key columns: the model cannot tell the two occurrences apart.
  {
    Tensor segment = random_tensor({seg_len, d}, rng);
    Tensor ext = ops::concat_rows(segment, segment);  // memory = same content
    Tensor q_in = random_tensor({seg_len, d}, rng);
    Tensor scores = abs_scores(q_in, ext, params, u_table);
    for (int i = 0; i < seg_len; ++i) {
      for (int j = 0; j < seg_len; ++j) {
        CHECK(scores.at(i, j) == doctest::Approx(scores.at(i, j + seg_len)).epsilon(1e-12));
      }
    }
  }

  // The four-term expansion agrees with the single-matmul form.
  {
    Tensor q_in = random_tensor({seg_len, d}, rng);
    Tensor ext = random_tensor({2 * seg_len, d}, rng);
    Tensor scores = abs_scores(q_in, ext, params, u_table);

    Tensor u_q = ops::slice_rows(u_table, 0, seg_len);
    Tensor u_e = ops::concat_rows(u_q, u_q);  // ext reuse of the segment table
    Tensor eq = ops::matmul(q_in, params.wq);
    Tensor uq = ops::matmul(u_q, params.wq);
    Tensor ek = ops::matmul(ext, params.wk);
    Tensor uk = ops::matmul(u_e, params.wk);
    Tensor term_a = ops::matmul_nt(eq, ek);
    Tensor term_b = ops::matmul_nt(eq, uk);
    Tensor term_c = ops::matmul_nt(uq, ek);
    Tensor term_d = ops::matmul_nt(uq, uk);
    Tensor expanded = ops::add(ops::add(term_a, term_b), ops::add(term_c, term_d));
    for (int i = 0; i < seg_len; ++i) {
      for (int j = 0; j < 2 * seg_len; ++j) {
        CHECK(std::abs(scores.at(i, j) - expanded.at(i, j)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("attention sublayer: single position attends itself") {
  Rng rng(23);
  const int d = 4;
  RelAttnParams params;
  params.wq = random_tensor({d, d}, rng);
  params.wke = random_tensor({d, d}, rng);
  params.wkr = random_tensor({d, d}, rng);
  params.wv = random_tensor({d, d}, rng);
  params.wo = random_tensor({d, d}, rng);
  params.u = random_tensor({1, d}, rng);
  params.v = random_tensor({1, d}, rng);
  Tensor ln_gain = Tensor::from({d}, std::vector<double>(d, 1.0));
  Tensor ln_bias = Tensor::from({d}, std::vector<double>(d, 0.0));
  Tensor table = sinusoid_table(1, d);

  AttnOptions opt;
  opt.n_heads = 1;
  opt.score_scale = 0.5;

  Tensor h = random_tensor({1, d}, rng);
  Tensor out = rel_attention_sublayer(h, Tensor{}, params, ln_gain, ln_bias, 1e-5, table, opt);

  // With one position the softmax weight is 1: out = LN(v0 wo + h0).
  Tensor v0 = ops::matmul(h, params.wv);
  Tensor expected = ops::layer_norm(ops::add(ops::matmul(v0, params.wo), h), ln_gain, ln_bias, 1e-5);
  for (int j = 0; j < d; ++j) {
    CHECK(out.at(0, j) == doctest::Approx(expected.at(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("attention sublayer: causality is exact") {
  Rng rng(29);
  const int d = 8, seg_len = 5;
  RelAttnParams params;
  params.wq = random_tensor({d, d}, rng);
  params.wke = random_tensor({d, d}, rng);
  params.wkr = random_tensor({d, d}, rng);
  params.wv = random_tensor({d, d}, rng);
  params.wo = random_tensor({d, d}, rng);
  params.u = random_tensor({2, d / 2}, rng);
  params.v = random_tensor({2, d / 2}, rng);
  Tensor ln_gain = Tensor::from({d}, std::vector<double>(d, 1.0));
  Tensor ln_bias = Tensor::from({d}, std::vector<double>(d, 0.0));
  Tensor table = sinusoid_table(seg_len, d);

  AttnOptions opt;
  opt.n_heads = 2;
  opt.score_scale = 0.5;

  Tensor h = random_tensor({seg_len, d}, rng);
  Tensor base = rel_attention_sublayer(h, Tensor{}, params, ln_gain, ln_bias, 1e-5, table, opt);

  for (int perturbed = 1; perturbed < seg_len; ++perturbed) {
    Tensor h2 = h.detached_copy();
    h2.at(perturbed, 0) += 10.0;
    Tensor out = rel_attention_sublayer(h2, Tensor{}, params, ln_gain, ln_bias, 1e-5, table, opt);
    for (int i = 0; i < perturbed; ++i) {
      for (int j = 0; j < d; ++j) CHECK(out.at(i, j) == base.at(i, j));  // bit-exact
    }
  }
}

TEST_CASE("constant content: pre-mask scores depend only on distance") {
  Rng rng(31);
  const int d = 6, d_head = 6, seg_len = 4, mem_len = 3;
  Tensor table = sinusoid_table(mem_len + seg_len, d);
  // Same vector at every position.
  std::vector<double> row(d_head);
  for (double& v : row) v = rng.normal();
  std::vector<double> q_data, k_data;
  for (int i = 0; i < seg_len; ++i) q_data.insert(q_data.end(), row.begin(), row.end());
  for (int j = 0; j < mem_len + seg_len; ++j) k_data.insert(k_data.end(), row.begin(), row.end());
  Tensor q = Tensor::from({seg_len, d_head}, q_data);
  Tensor keys = Tensor::from({mem_len + seg_len, d_head}, k_data);
  Tensor wkr = random_tensor({d, d_head}, rng);
  Tensor u = random_tensor({1, d_head}, rng);
  Tensor v = random_tensor({1, d_head}, rng);

  Tensor scores = rel_scores_fast(q, keys, table, wkr, u, v);
  // Moving one step down-and-left keeps the distance i-j fixed, so the
  // score is unchanged wherever both cells are causally valid.
  for (int i = 1; i < seg_len; ++i) {
    for (int j = 1; j <= mem_len + i; ++j) {
      CHECK(std::abs(scores.at(i, j) - scores.at(i - 1, j - 1)) <= 1e-12);
    }
  }
}

TEST_CASE("causality invariant: post-softmax weight beyond the window is zero") {
  Rng rng(37);
  const int seg_len = 4, mem_len = 2;
  Tensor scores = random_tensor({seg_len, mem_len + seg_len}, rng);
  Tensor weights = ops::masked_softmax(scores, ops::BoolMatrix::causal(seg_len, mem_len));
  for (int i = 0; i < seg_len; ++i) {
    for (int j = mem_len + i + 1; j < mem_len + seg_len; ++j) {
      CHECK(weights.at(i, j) == 0.0);
    }
  }
}
