// Copyright 2026 The TCS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "tcs/codec.hpp"
#include "test_util.hpp"

namespace tcs {
namespace {

using Idx = std::vector<std::uint32_t>;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reference position encoder working on a '0'/'1' string.
std::string position_oracle(const Idx& pos, std::size_t d, std::size_t bs) {
  unsigned w = 0;
  while ((std::size_t{1} << w) < bs) ++w;
  std::string s;
  std::size_t blocks = (d + bs - 1) / bs;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (auto p : pos) {
      if (p / bs != b) continue;
      s += '1';
      for (int k = static_cast<int>(w) - 1; k >= 0; --k) s += ((p % bs) >> k) & 1 ? '1' : '0';
    }
    s += '0';
  }
  return s;
}

// ---------------------------------------------------------------------------
// bit I/O

TEST(BitIo, MsbFirstAndLittleEndian) {
  BitWriter w;
  w.put_le(0x0201, 2);
  w.put(true);
  w.put_bits(0b01, 2);
  EXPECT_THROW(w.put_le(1, 1), ContractViolation);  // header fields are byte aligned
  auto bytes = std::move(w).take();
  ASSERT_EQ(bytes.size(), 3u);
  EXPECT_EQ(bytes[0], 0x01);
  EXPECT_EQ(bytes[1], 0x02);
  EXPECT_EQ(bytes[2], 0xA0);  // 101 then zero fill

  BitReader r(bytes, 19);
  EXPECT_EQ(r.get_le(2), 0x0201u);
  EXPECT_TRUE(r.get());
  EXPECT_EQ(r.get_bits(2), 1u);
  EXPECT_EQ(r.remaining(), 0u);
  EXPECT_THROW(r.get(), MalformedPayload);
}

TEST(BitIo, CeilLog2) {
  EXPECT_EQ(ceil_log2(1), 0u);
  EXPECT_EQ(ceil_log2(2), 1u);
  EXPECT_EQ(ceil_log2(3), 2u);
  EXPECT_EQ(ceil_log2(4), 2u);
  EXPECT_EQ(ceil_log2(1000), 10u);
  EXPECT_EQ(ceil_log2(1024), 10u);
}

// ---------------------------------------------------------------------------
// position coding

TEST(PositionCoding, WorkedExample) {
  // 1-indexed {1, 3, 10} in the worked example, shifted to 0-indexed.
  Idx one_indexed{1, 3, 10};
  Idx pos;
  for (auto p : one_indexed) pos.push_back(p - 1);
  auto bits = encode_positions(pos, 12, 4);
  EXPECT_EQ(bits.to_string(), "100110001010");
  EXPECT_EQ(bits.bit_length, 12u);
  EXPECT_EQ(bits.bytes, (std::vector<std::uint8_t>{0x98, 0xA0}));
  EXPECT_EQ(decode_positions(bits), pos);
}

TEST(PositionCoding, EmptyAndErrors) {
  auto bits = encode_positions(Idx{}, 8, 4);
  EXPECT_EQ(bits.to_string(), "00");
  EXPECT_TRUE(decode_positions(bits).empty());
  EXPECT_THROW(encode_positions(Idx{3, 2}, 8, 4), ContractViolation);
  EXPECT_THROW(encode_positions(Idx{2, 2}, 8, 4), ContractViolation);
  EXPECT_THROW(encode_positions(Idx{8}, 8, 4), ContractViolation);
  EXPECT_THROW(encode_positions(Idx{0}, 8, 0), ContractViolation);
}

TEST(PositionCoding, MalformedStreams) {
  // truncated: second terminator missing
  PositionBitstream t{{0x00}, 1, 8, 4};
  EXPECT_THROW(decode_positions(t), MalformedPayload);
  // offset 3 in a final partial block of extent 2 (d=6)
  PositionBitstream p{{0b01110000}, 5, 6, 4};  // 0 | 1 11 0
  try {
    decode_positions(p);
    FAIL() << "expected MalformedPayload";
  } catch (const MalformedPayload& e) {
    EXPECT_EQ(e.bit_offset(), 1u);
    EXPECT_NE(std::string(e.what()).find("bit offset 1"), std::string::npos);
  }
  // non-increasing offsets inside a block: 1 10 1 01 0 0
  PositionBitstream n{{0b11010100, 0}, 8, 8, 4};
  EXPECT_THROW(decode_positions(n), MalformedPayload);
  // trailing bits
  PositionBitstream x{{0x00}, 3, 8, 4};
  EXPECT_THROW(decode_positions(x), MalformedPayload);
}

TEST(PositionCoding, NonPowerOfTwoBlocks) {
  // block 3 -> w = 2; offsets 0..2; d = 7 leaves a partial block of extent 1
  Idx pos{0, 2, 4, 6};
  auto bits = encode_positions(pos, 7, 3);
  EXPECT_EQ(bits.to_string(), position_oracle(pos, 7, 3));
  EXPECT_EQ(bits.bit_length, position_bits(4, 7, 3));
  EXPECT_EQ(decode_positions(bits), pos);
}

TEST(PositionCoding, RoundTripAgainstStringOracle) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 4096, bs = 64;
    auto pos = testing::random_positions(gen, d, gen() % 200);
    auto bits = encode_positions(pos, d, bs);
    ASSERT_EQ(bits.to_string(), position_oracle(pos, d, bs));
    ASSERT_EQ(bits.bit_length, pos.size() * 7 + 64);
    ASSERT_EQ(decode_positions(bits), pos);
  }
}

TEST(PositionCoding, BlockSizeForRatio) {
  EXPECT_EQ(block_size_for_ratio(0.25), 4u);
  EXPECT_EQ(block_size_for_ratio(0.01), 100u);
  EXPECT_EQ(block_size_for_ratio(0.001), 1000u);
  EXPECT_EQ(block_size_for_ratio(0.3), 4u);
  EXPECT_EQ(block_size_for_ratio(1.0), 1u);
}

// ---------------------------------------------------------------------------
// quantization

TEST(ScaledSign, Examples) {
  std::vector<double> a{1, -1, 1}, b{4, -2}, z{0, -2};
  EXPECT_EQ(scaled_sign_quantize(a), (std::vector<double>{1, -1, 1}));
  EXPECT_EQ(scaled_sign_quantize(b), (std::vector<double>{3, -3}));
  EXPECT_EQ(scaled_sign_quantize(z), (std::vector<double>{1, -1}));  // sign(0) = +1
}

TEST(ScaledSign, MatchesDirectFormula) {
  std::mt19937_64 gen(37);
  std::normal_distribution<double> nd;
  std::vector<double> u(1000);
  for (auto& x : u) x = nd(gen);
  double l1 = 0;
  for (double x : u) l1 += std::fabs(x);
  auto q = scaled_sign_quantize(u);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_DOUBLE_EQ(q[i], (u[i] >= 0 ? 1 : -1) * l1 / 1000);
}

TEST(Fractional, Example) {
  std::vector<double> u{8, 4, 2, 1};
  auto fq = fractional_quantize(u, 2);
  EXPECT_NEAR(fq.sigma, std::sqrt(1.0 / 8.0), 1e-15);
  EXPECT_EQ(fq.levels, (std::vector<double>{6, 1.5}));
  EXPECT_EQ(fq.dequantize(), (std::vector<double>{6, 6, 1.5, 1.5}));

  std::vector<double> neg{-8, 4, -2, 1};
  EXPECT_EQ(fractional_quantize(neg, 2).dequantize(), (std::vector<double>{-6, 6, -1.5, 1.5}));
}

TEST(Fractional, DegenerateAndErrors) {
  std::vector<double> c{2.5, -2.5, 2.5};
  auto fq = fractional_quantize(c, 4);
  EXPECT_EQ(fq.sigma, 1.0);
  EXPECT_EQ(fq.dequantize(), c);
  EXPECT_EQ(fq.gamma(), 0.0);
  std::vector<double> z{1, 0};
  EXPECT_THROW(fractional_quantize(z, 2), ContractViolation);
  EXPECT_THROW(fractional_quantize(std::vector<double>{1.0}, 0), ContractViolation);
}

TEST(Fractional, BoundaryGoesToSmallerInterval) {
  // P=2 over magnitudes {4, 2, 1}: sigma = 1/2, boundary exactly 2.
  std::vector<double> u{4, 2, 1};
  auto fq = fractional_quantize(u, 2);
  EXPECT_EQ(fq.index, (Idx{0, 1, 1}));
  EXPECT_EQ(fq.levels, (std::vector<double>{4, 1.5}));
}

TEST(Fractional, EmptyIntervalGetsGeometricMidpoint) {
  // P=3 over {8, 1}: sigma = 1/2, I_2 = (2, 4] is empty.
  std::vector<double> u{8, 1};
  auto fq = fractional_quantize(u, 3);
  EXPECT_NEAR(fq.levels[1], 8 * std::pow(0.5, 1.5), 1e-12);
}

TEST(Fractional, MatchesDirectOracleAndBound) {
  std::mt19937_64 gen(41);
  std::lognormal_distribution<double> mag(0.0, 2.0);
  std::bernoulli_distribution sgn(0.5);
  for (std::uint32_t P : {1u, 2u, 4u, 16u}) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> u(1 + gen() % 300);
      for (auto& x : u) x = (sgn(gen) ? -1 : 1) * mag(gen);
      auto fq = fractional_quantize(u, P);

      // Oracle: interval by logarithm, then plain means.
      double umax = 0, umin = INFINITY;
      for (double x : u) umax = std::max(umax, std::fabs(x)), umin = std::min(umin, std::fabs(x));
      const double sigma = std::pow(umin / umax, 1.0 / P);
      std::vector<double> sum(P, 0);
      std::vector<int> cnt(P, 0);
      std::vector<std::uint32_t> idx(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = std::fabs(u[i]);
        std::uint32_t p = 0;
        if (sigma < 1) {
          double r = std::log(umax / a) / std::log(1 / sigma);  // a in (s^p, s^(p-1)] -> ceil(r) = p
          p = static_cast<std::uint32_t>(std::max(1.0, std::ceil(r - 1e-12))) - 1;
          p = std::min(p, P - 1);
        }
        idx[i] = p;
        sum[p] += a;
        cnt[p] += 1;
      }
      ASSERT_EQ(fq.index, idx) << "P=" << P;
      for (std::uint32_t p = 0; p < P; ++p)
        if (cnt[p]) {
          EXPECT_NEAR(fq.levels[p], sum[p] / cnt[p], 1e-12 * sum[p] / cnt[p]);
        }

      auto q = fq.dequantize();
      const double gamma = (1 - sigma) / sigma;
      for (std::size_t i = 0; i < u.size(); ++i) {
        ASSERT_LE(std::fabs(q[i] - u[i]), gamma * std::fabs(u[i]));
        ASSERT_EQ(std::signbit(q[i]), std::signbit(u[i]));
      }
      if (P == 1) {
        EXPECT_EQ(q, scaled_sign_quantize(u));
      }
    }
  }
}

TEST(QuantizerSpec, BitsPerValue) {
  EXPECT_EQ(QuantizerSpec::none().bits_per_value(), 32u);
  EXPECT_EQ(QuantizerSpec::scaled_sign().bits_per_value(), 1u);
  EXPECT_EQ(QuantizerSpec::fractional(16).bits_per_value(), 5u);
  EXPECT_EQ(QuantizerSpec::fractional(1).bits_per_value(), 1u);
  EXPECT_EQ(QuantizerSpec::fractional_bits(5).P, 16u);
  EXPECT_EQ(QuantizerSpec::fractional(3).bits_per_value(), 3u);
}

// ---------------------------------------------------------------------------
// payload

SparseUpdate example_update() {
  auto l = LayerLayout::make({12});
  // global mask empty; all three positions travel in the local section
  return SparseUpdate{Mask(l), {}, Mask(l, {0, 2, 9}), {1.0, -2.5, 0.75}};
}

TEST(Payload, GoldenVector) {
  auto su = example_update();
  auto p = encode_payload(su, QuantizerSpec::none(), 0.25, 0);
  auto golden = read_file(std::string(TCS_GOLDEN_DIR) + "/worked_example.payload");
  EXPECT_EQ(p.bytes, golden);

  // position section sits right after the (empty) global section
  std::vector<std::uint8_t> body(p.bytes.begin() + kPayloadHeaderBytes, p.bytes.end());
  EXPECT_EQ(body[0], 0x98);
  EXPECT_EQ(body[1] & 0xF0, 0xA0);

  auto back = decode_payload(golden, Mask(su.global.layout()));
  std::ifstream vin(std::string(TCS_GOLDEN_DIR) + "/worked_example.values");
  std::vector<double> expect;
  for (double x; vin >> x;) expect.push_back(x);
  EXPECT_EQ(back.to_dense().vec(), expect);
}

TEST(Payload, DenseRawFloats) {
  auto l = LayerLayout::make({3});
  SparseUpdate su{Mask::full(l), {1.0, -0.5, 3.25}, Mask(l), {}};
  auto p = encode_payload(su, QuantizerSpec::none(), 0.0, 7);
  ASSERT_EQ(p.bytes.size(), kPayloadHeaderBytes + 12);
  float f;
  std::memcpy(&f, p.bytes.data() + kPayloadHeaderBytes, 4);
  // big-endian bit order inside the body: reassemble the first value
  std::uint32_t bits = 0;
  for (int k = 0; k < 4; ++k) bits = bits << 8 | p.bytes[kPayloadHeaderBytes + k];
  std::memcpy(&f, &bits, 4);
  EXPECT_EQ(f, 1.0f);
  auto back = decode_payload(p, Mask::full(l));
  EXPECT_EQ(back.global_values, su.global_values);
  EXPECT_EQ(read_payload_header(p.bytes).round, 7u);
}

TEST(Payload, RoundTripAllKinds) {
  std::mt19937_64 gen(43);
  auto l = LayerLayout::make({300, 200});
  const QuantizerSpec specs[] = {QuantizerSpec::none(), QuantizerSpec::scaled_sign(),
                                 QuantizerSpec::fractional(16), QuantizerSpec::fractional(3)};
  for (int trial = 0; trial < 200; ++trial) {
    auto g = testing::random_mask(gen, l, 0.05);
    auto v = testing::random_vector(gen, l);
    std::set<std::uint32_t> ex(g.indices().begin(), g.indices().end());
    auto local = Mask(l, testing::sort_topk_oracle(v.vec(), 1 + gen() % 5, ex));
    SparseUpdate su{g, gather(v, g), local, gather(v, local)};
    const auto& spec = specs[trial % 4];
    auto enc = encode_payload_with_values(su, spec, 0.01, trial);
    auto back = decode_payload(enc.payload, g);
    ASSERT_EQ(back.global, su.global);
    ASSERT_EQ(back.local, su.local);
    EXPECT_EQ(back.global_values, enc.dequantized.global_values);
    EXPECT_EQ(back.local_values, enc.dequantized.local_values);

    std::vector<double> all(su.global_values);
    all.insert(all.end(), su.local_values.begin(), su.local_values.end());
    std::vector<double> got(back.global_values);
    got.insert(got.end(), back.local_values.begin(), back.local_values.end());
    if (spec.kind == QuantizerKind::none) {
      for (std::size_t i = 0; i < all.size(); ++i)
        EXPECT_EQ(got[i], static_cast<double>(static_cast<float>(all[i])));
    } else if (spec.kind == QuantizerKind::fractional) {
      auto fq = fractional_quantize(all, spec.P);
      for (std::size_t i = 0; i < all.size(); ++i)
        EXPECT_LE(std::fabs(got[i] - all[i]),
                  fq.gamma() * std::fabs(all[i]) + 0x1p-23 * std::fabs(all[i]));
    }

    // measured size matches the layout arithmetic
    std::size_t bits = kPayloadHeaderBytes * 8 + 32 * spec.table_size() +
                       spec.bits_per_value() * (g.popcount() + local.popcount()) +
                       position_bits(local.popcount(), 500, 100);
    EXPECT_EQ(enc.payload.bytes.size(), (bits + 7) / 8);
  }
}

TEST(Payload, DecodeRejectsMismatchAndCorruption) {
  auto su = example_update();
  auto p = encode_payload(su, QuantizerSpec::none(), 0.25);
  auto l = su.global.layout();
  EXPECT_THROW(decode_payload(p, Mask(l, {1})), MalformedPayload);         // K_global mismatch
  EXPECT_THROW(decode_payload(p, Mask(LayerLayout::make({13}))), MalformedPayload);  // d mismatch

  auto trunc = p.bytes;
  trunc.pop_back();
  EXPECT_THROW(decode_payload(trunc, Mask(l)), MalformedPayload);
  auto extra = p.bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_payload(extra, Mask(l)), MalformedPayload);
  auto bad_kind = p.bytes;
  bad_kind[16] = 9;
  EXPECT_THROW(decode_payload(bad_kind, Mask(l)), MalformedPayload);
  EXPECT_THROW(decode_payload(std::vector<std::uint8_t>{1, 2, 3}, Mask(l)), MalformedPayload);
}

TEST(Payload, FuzzedBytesNeverEscapeTheErrorType) {
  std::mt19937_64 gen(47);
  auto l = LayerLayout::make({500});
  auto g = Mask(l, testing::random_positions(gen, 500, 20));
  auto v = testing::random_vector(gen, l);
  std::set<std::uint32_t> ex(g.indices().begin(), g.indices().end());
  auto local = Mask(l, testing::sort_topk_oracle(v.vec(), 5, ex));
  SparseUpdate su{g, gather(v, g), local, gather(v, local)};
  for (auto spec : {QuantizerSpec::none(), QuantizerSpec::fractional(16)}) {
    auto good = encode_payload(su, spec, 0.01).bytes;
    for (int trial = 0; trial < 3000; ++trial) {
      auto b = good;
      int flips = 1 + gen() % 4;
      for (int f = 0; f < flips; ++f) b[gen() % b.size()] ^= std::uint8_t(1u << (gen() % 8));
      try {
        auto out = decode_payload(b, g);
        for (auto i : out.local.indices()) ASSERT_LT(i, 500u);
        for (double x : out.local_values) ASSERT_TRUE(std::isfinite(x));
      } catch (const MalformedPayload&) {
      }
    }
  }
}

// ---------------------------------------------------------------------------
// bit budget

TEST(BitBudget, TableValues) {
  EXPECT_NEAR(bit_budget(Scheme::tcs, 32, 0.01, 0.001, 1), 0.363, 0.002);
  EXPECT_NEAR(bit_budget(Scheme::tcs, 32, 0.01, 0.001, 2), 0.1815, 0.001);
  EXPECT_NEAR(bit_budget(Scheme::tcs, 32, 0.01, 0.001, 4), 0.0907, 0.0005);
  EXPECT_NEAR(bit_budget(Scheme::tcs, 5, 0.01, 0.001, 4), 0.01675, 0.0002);
  EXPECT_NEAR(bit_budget(Scheme::topk, 32, 0.01, 0.0, 1), 0.41, 0.005);
  // exact analytic values from an independent evaluation
  EXPECT_NEAR(bit_budget(Scheme::tcs, 32, 0.01, 0.001, 1), 0.3639657842846621, 1e-15);
  EXPECT_NEAR(bit_budget(Scheme::topk, 32, 0.01, 0.0, 1), 0.40643856189774724, 1e-15);
  EXPECT_DOUBLE_EQ(bit_budget(Scheme::randk, 32, 0.01, 0.0, 2), 0.16);
  EXPECT_DOUBLE_EQ(bit_budget(Scheme::none, 32, 1, 0, 4), 8.0);
}

TEST(BitBudget, Log2dVariant) {
  EXPECT_NEAR(bit_budget(Scheme::tcs, 32, 0.01, 0.001, 1, 11173962, PositionCost::log2d), 0.3754,
              1e-4);
  EXPECT_NEAR(bit_budget(Scheme::topk, 32, 0.01, 0.0, 1, 11173962, PositionCost::log2d), 0.5541,
              1e-4);
}

TEST(BitBudget, MeasuredConvergesToAnalytic) {
  // power-of-two block size so the analytic log2 matches the integer width
  std::mt19937_64 gen(53);
  const double phi_g = 1.0 / 16, phi_l = 1.0 / 256;
  double prev_gap = INFINITY;
  for (std::size_t d : {4096u, 65536u, 1048576u}) {
    auto l = LayerLayout::make({d});
    auto g = Mask(l, testing::random_positions(gen, d, d / 16));
    // local positions: one per block of 256 outside g
    std::vector<std::uint32_t> loc;
    for (std::size_t b = 0; b < d / 256; ++b)
      for (std::uint32_t i = b * 256; i < (b + 1) * 256; ++i)
        if (!g.contains(i)) {
          loc.push_back(i);
          break;
        }
    Mask m(l, loc);
    SparseUpdate su{g, std::vector<double>(g.popcount(), 1.0), m, std::vector<double>(loc.size(), 1.0)};
    auto p = encode_payload(su, QuantizerSpec::none(), phi_l);
    double measured = measured_bits_per_param(p.size_bits(), d, 1);
    double analytic = bit_budget(Scheme::tcs, 32, phi_g, phi_l, 1);
    double gap = std::fabs(measured - analytic) / analytic;
    EXPECT_LE(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.05);
}

}  // namespace
}  // namespace tcs
