#include <doctest.h>

#include "secmax/ot.hpp"

using namespace secmax;

namespace {

std::vector<std::array<Label, 2>> random_pairs(std::size_t n, Prng& rng) {
  std::vector<std::array<Label, 2>> out(n);
  for (auto& p : out) p = {Label::random(rng), Label::random(rng)};
  return out;
}

}  // namespace

TEST_SUITE("ot") {

TEST_CASE("group parameters") {
  const OtParams standard = OtParams::standard();
  CHECK(standard.group->name() == "ristretto255");
  CHECK(standard.group->element_bytes() == 32);
  CHECK(standard.group->is_secure());
  CHECK(standard.group->is_valid(standard.setup));

  const OtParams test = OtParams::by_name("test");
  CHECK(test.group->name() == "insecure-test-61");
  CHECK_FALSE(test.group->is_secure());
  CHECK(test.group->element_bytes() == 8);
  CHECK(OtParams::by_name("insecure-test-61").setup == test.setup);
  CHECK_THROWS_AS(OtParams::by_name("p256"), ContractError);
}

TEST_CASE("group arithmetic") {
  Prng rng(1);
  for (const OtParams& params : {OtParams::standard(), OtParams::insecure_test()}) {
    const OtGroup& g = *params.group;
    const auto a = g.random_scalar(rng), b = g.random_scalar(rng);
    // a(bG) == b(aG)
    CHECK(g.mul(g.base_mul(b), a) == g.mul(g.base_mul(a), b));
    const auto x = g.base_mul(a);
    CHECK(g.is_valid(g.sub(params.setup, x)));
    CHECK(g.hash_to_element("x") == g.hash_to_element("x"));
    CHECK_FALSE(g.hash_to_element("x") == g.hash_to_element("y"));
    OtGroup::Element bad(g.element_bytes(), 0xff);
    CHECK_FALSE(g.is_valid(bad));
    CHECK_THROWS_AS(g.mul(bad, a), ProtocolError);
  }
}

TEST_CASE("receiver learns exactly the chosen labels") {
  Prng rng(2);
  for (const OtParams& params : {OtParams::standard(), OtParams::insecure_test()}) {
    const std::size_t n = 64;
    const auto pairs = random_pairs(n, rng);
    std::vector<bool> choices(n);
    for (std::size_t i = 0; i < n; ++i) choices[i] = rng.bits(1) != 0;
    auto [request, state] = ot_receive_phase1(params, choices, rng);
    const OtResponse response = ot_send(params, request, pairs, rng);
    const auto got = ot_receive_phase2(params, response, state);
    REQUIRE(got.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(got[i] == pairs[i][choices[i] ? 1 : 0]);
      CHECK_FALSE(ot_try_unwrap(params, response, state, i, choices[i] ? 0 : 1).has_value());
    }
  }
}

TEST_CASE("every choice pattern on four bits") {
  Prng rng(3);
  const OtParams params = OtParams::insecure_test();
  for (unsigned pattern = 0; pattern < 16; ++pattern) {
    std::vector<bool> choices{(pattern & 1) != 0, (pattern & 2) != 0, (pattern & 4) != 0, (pattern & 8) != 0};
    const auto pairs = random_pairs(4, rng);
    auto [request, state] = ot_receive_phase1(params, choices, rng);
    const auto got = ot_receive_phase2(params, ot_send(params, request, pairs, rng), state);
    for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == pairs[i][choices[i]]);
  }
}

TEST_CASE("serialization round trips and sizes") {
  Prng rng(4);
  for (const OtParams& params : {OtParams::standard(), OtParams::insecure_test()}) {
    const std::size_t n = 16, w = params.group->element_bytes();
    std::vector<bool> choices(n, true);
    auto [request, state] = ot_receive_phase1(params, choices, rng);
    const auto req_bytes = serialize_ot_request(params, request);
    CHECK(req_bytes.size() == n * w);
    const OtRequest req_back = deserialize_ot_request(params, req_bytes);
    CHECK(req_back.keys == request.keys);

    const auto pairs = random_pairs(n, rng);
    const OtResponse response = ot_send(params, req_back, pairs, rng);
    const auto resp_bytes = serialize_ot_response(params, response);
    CHECK(resp_bytes.size() == n * (w + 64));
    const OtResponse back = deserialize_ot_response(params, resp_bytes);
    const auto got = ot_receive_phase2(params, back, state);
    for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == pairs[i][1]);

    CHECK_THROWS_AS(deserialize_ot_request(params, std::vector<std::uint8_t>(w + 1)), ProtocolError);
    CHECK_THROWS_AS(deserialize_ot_response(params, std::vector<std::uint8_t>(w + 63)), ProtocolError);
  }
}

TEST_CASE("tampering is detected") {
  Prng rng(5);
  const OtParams params = OtParams::insecure_test();
  const auto pairs = random_pairs(8, rng);
  std::vector<bool> choices(8, false);
  auto [request, state] = ot_receive_phase1(params, choices, rng);
  OtResponse response = ot_send(params, request, pairs, rng);
  response.slots[3][0].tag[0] ^= 1;
  CHECK_THROWS_AS(ot_receive_phase2(params, response, state), ProtocolError);

  OtRequest short_request = request;
  short_request.keys.pop_back();
  CHECK_THROWS_AS(ot_send(params, short_request, pairs, rng), ProtocolError);
}

}
