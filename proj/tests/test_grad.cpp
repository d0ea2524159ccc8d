// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include <gtest/gtest.h>

#include "taylorse/autodiff/grad_suite.hpp"

using namespace taylorse::ad;

template <class T>
class GradSuite : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(GradSuite, Precisions);

TYPED_TEST(GradSuite, EveryPrimitiveFewSeeds) {
  for (std::uint64_t seed = 100; seed < 103; ++seed)
    for (const auto& c : gradient_cases<TypeParam>(seed)) {
      auto r = check_case(c, seed);
      EXPECT_TRUE(r.passed()) << c.name << " seed " << seed << " err " << r.max_rel_error
                              << " (" << r.worst << ")";
      EXPECT_GT(r.checked, 0u);
    }
}

TEST(GradCheck, NamedExamples32Bit) {
  for (const auto& c : gradient_cases<float>(7)) {
    if (c.name != "conv2d" && c.name != "instance_norm" && c.name != "glu") continue;
    auto r = check_case(c, 7);
    EXPECT_LE(r.max_rel_error, 1e-3) << c.name;
    if (c.name == "conv2d") EXPECT_EQ(c.inputs[0].shape(), (Shape{1, 2, 4, 5}));
  }
}

TEST(GradCheck, DetectsWrongGradient) {
  // A deliberately wrong backward rule must be flagged.
  LossFn<double> bad = [](Tape<double>& tape, const std::vector<Var<double>>& v) {
    auto x = v[0];
    Tensor<double> y = x.value();
    for (auto& e : y.data()) e = e * e;
    auto out = tape.record(std::move(y), {x}, [x](const Tensor<double>& g) {
      auto& gx = x.tape().grad_ref(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * x.value()[i];  // missing 2
    });
    return sum(out);
  };
  auto r = grad_check<double>(bad, {Tensor<double>({3}, {1.0, 2.0, 3.0})}, 1e-6, 1e-5);
  EXPECT_FALSE(r.passed());
}
