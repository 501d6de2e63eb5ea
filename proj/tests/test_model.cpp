#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "headtrack/errors.hpp"
#include "headtrack/model.hpp"

using namespace headtrack;

TEST_SUITE("model") {

TEST_CASE("well-formed volume validates") {
  const auto fv = fixtures::random_volume(fixtures::dims(2, 3, 2, 3, 4, 8), {2, 2, 4}, 1, true);
  const auto r = validate_feature_volume(fv);
  CHECK(r.ok);
  CHECK(fv.expected_size(DescriptorKind::key) == 2u * 3 * 2 * 3 * 4 * 8);
  CHECK(fv.expected_size(DescriptorKind::hidden) == 2u * 2 * 3 * 4 * 3 * 8);
  CHECK(fv.kinds_mask() == 7u);
}

TEST_CASE("rope sum mismatch is named") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 1, 2, 2, 8), {2, 2, 2}, 1);
  const auto r = validate_feature_volume(fv);
  CHECK_FALSE(r.ok);
  CHECK(r.message.find("RopeLayout sum") != std::string::npos);
}

TEST_CASE("non-finite value reports its flat index") {
  auto fv = fixtures::random_volume(fixtures::dims(1, 2, 2, 2, 2, 8), {2, 2, 4}, 1);
  fv.mutable_data(DescriptorKind::key)[37] = std::numeric_limits<float>::quiet_NaN();
  const auto r = validate_feature_volume(fv);
  CHECK_FALSE(r.ok);
  REQUIRE(r.flat_index);
  CHECK(*r.flat_index == 37u);
  CHECK(r.kind == DescriptorKind::key);
}

TEST_CASE("set rejects a wrong-sized array") {
  FeatureVolume fv(fixtures::dims(1, 1, 1, 2, 2, 4), {2, 0, 2});
  CHECK_THROWS_AS(fv.set(DescriptorKind::query, std::vector<float>(3)), DomainError);
}

TEST_CASE("offsets follow the documented layouts") {
  const auto d = fixtures::dims(2, 3, 4, 5, 6, 8);
  FeatureVolume fv(d, {2, 2, 4});
  CHECK(fv.offset(DescriptorKind::key, 1, 2, 3, 4, 5) == ((((1u * 3 + 2) * 4 + 3) * 5 + 4) * 6 + 5) * 8);
  CHECK(fv.offset(DescriptorKind::hidden, 1, 0, 3, 4, 5) == ((((1u * 4 + 3) * 5 + 4) * 6 + 5)) * 24);
}

TEST_CASE("descriptor_at bilinear weights") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 1, 4, 5, 4), {2, 0, 2}, 9);
  const auto cell = [&](int y, int x) { return fv.cell(DescriptorKind::key, 0, 0, 0, y, x); };

  const auto exact = descriptor_at(fv, DescriptorKind::key, 0, 0, 0, 2, 3);
  for (int i = 0; i < 4; ++i) CHECK(exact[i] == cell(2, 3)[i]);

  const auto mid = descriptor_at(fv, DescriptorKind::key, 0, 0, 0, 1, 1.5);
  for (int i = 0; i < 4; ++i) CHECK(mid[i] == doctest::Approx((cell(1, 1)[i] + cell(1, 2)[i]) / 2).epsilon(1e-6));

  const auto q = descriptor_at(fv, DescriptorKind::key, 0, 0, 0, 0.25, 0);
  for (int i = 0; i < 4; ++i) CHECK(q[i] == doctest::Approx(0.75 * cell(0, 0)[i] + 0.25 * cell(1, 0)[i]).epsilon(1e-6));

  // Independent four-corner oracle at a generic point.
  const double y = 2.3, x = 1.6;
  const auto g = descriptor_at(fv, DescriptorKind::key, 0, 0, 0, y, x);
  for (int i = 0; i < 4; ++i) {
    const double want = 0.7 * 0.4 * cell(2, 1)[i] + 0.7 * 0.6 * cell(2, 2)[i] + 0.3 * 0.4 * cell(3, 1)[i] +
                        0.3 * 0.6 * cell(3, 2)[i];
    CHECK(g[i] == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("descriptor_at errors") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 1, 2, 2, 4), {2, 0, 2}, 1);
  CHECK_THROWS_AS(descriptor_at(fv, DescriptorKind::hidden, 0, 0, 0, 0, 0), DescriptorUnavailable);
  CHECK_THROWS_AS(descriptor_at(fv, DescriptorKind::key, 0, 0, 0, 1.01, 0), DomainError);
  CHECK_THROWS_AS(descriptor_at(fv, DescriptorKind::key, 0, 0, 0, -0.01, 0), DomainError);
  CHECK_THROWS_AS(descriptor_at(fv, DescriptorKind::key, 0, 1, 0, 0, 0), DomainError);
}

TEST_CASE("pixel and cell coordinates") {
  CHECK(cell_to_pixel(0, 8) == 4.0);
  CHECK(pixel_to_cell(4.0, 8) == 0.0);
  CHECK(pixel_to_cell(20.0, 8) == 2.0);
  for (double c : {-0.5, 0.0, 1.25, 7.0}) CHECK(pixel_to_cell(cell_to_pixel(c, 8), 8) == doctest::Approx(c));
}

}
