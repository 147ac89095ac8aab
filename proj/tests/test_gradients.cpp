#include <gtest/gtest.h>

#include "gradient_cases.hpp"

using namespace mgvton::testing;

namespace {

void expect_clean(const std::vector<GradReport>& reports) {
  ASSERT_FALSE(reports.empty());
  for (const auto& r : reports) {
    EXPECT_EQ(r.checked, kSamples);
    EXPECT_EQ(r.failed, 0) << r.first_failure;
  }
}

}  // namespace

TEST(Gradients, ParsingGeneratorLoss) { expect_clean(grad_parsing_generator_loss()); }
TEST(Gradients, ParsingDiscriminatorLoss) { expect_clean(grad_parsing_discriminator_loss()); }
TEST(Gradients, ParsingLossLogMode) { expect_clean(grad_parsing_loss_log_mode()); }
TEST(Gradients, PerceptualLossWrtImage) { expect_clean(grad_perceptual_loss_wrt_image()); }
TEST(Gradients, FeatureMatchingLoss) { expect_clean(grad_feature_matching_loss()); }
TEST(Gradients, WarpGeneratorTotalLoss) { expect_clean(grad_warp_generator_total_loss()); }
TEST(Gradients, RenderLoss) { expect_clean(grad_render_loss()); }
TEST(Gradients, GeometricMatchingLoss) { expect_clean(grad_geometric_matching_loss()); }
TEST(Gradients, GeometricMatchingLossWrtParams) { expect_clean(grad_geometric_matching_loss_wrt_params()); }
