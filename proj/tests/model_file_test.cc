#include "asclf/model_file.h"

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

namespace asclf {
namespace {

namespace fs = std::filesystem;

constexpr const char* kMinimal = R"(
[dimensions]
N = 1
M = 1

[dynamics]
f1 = -x1
)";

template <typename Fn>
ModelFileError CaptureError(Fn&& fn) {
  try {
    fn();
  } catch (const ModelFileError& e) {
    return e;
  }
  ADD_FAILURE() << "no ModelFileError thrown";
  return ModelFileError(0, 0, 0, "none");
}

TEST(ModelFileTest, MinimalFileDefaultsDiffusionToZero) {
  const ModelFile f = ParseModelFile(kMinimal);
  EXPECT_EQ(f.model.state_dim(), 1);
  EXPECT_EQ(f.model.num_controls(), 1);
  EXPECT_FALSE(f.candidate.has_value());
  EXPECT_FALSE(f.model.domain().has_value());
  const VectorXd x = VectorXd::Constant(1, 0.5);
  EXPECT_DOUBLE_EQ(f.model.Drift(x, 0)[0], -0.5);
  EXPECT_DOUBLE_EQ(f.model.Diffusion(x, 0)(0, 0), 0.0);
}

TEST(ModelFileTest, BundledModelsLoadAndRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  int count = 0;
  for (const auto& entry : fs::directory_iterator(ASCLF_MODELS_DIR)) {
    if (entry.path().extension() != ".model") continue;
    ++count;
    const ModelFile a = LoadModelFile(entry.path());
    const std::string text = SerializeModelFile(a);
    const ModelFile b = ParseModelFile(text);
    EXPECT_EQ(SerializeModelFile(b), text) << entry.path();
    ASSERT_EQ(a.model.state_dim(), b.model.state_dim());
    ASSERT_EQ(a.model.num_controls(), b.model.num_controls());
    EXPECT_EQ(a.candidate.has_value(), b.candidate.has_value());
    EXPECT_EQ(a.target.has_value(), b.target.has_value());
    const int n = a.model.state_dim();
    for (int k = 0; k < 10; ++k) {
      VectorXd x(n);
      for (int i = 0; i < n; ++i) x[i] = u(rng);
      for (int c = 0; c < a.model.num_controls(); ++c) {
        EXPECT_EQ(a.model.Drift(x, c), b.model.Drift(x, c));
        EXPECT_EQ(a.model.Diffusion(x, c), b.model.Diffusion(x, c));
      }
      if (a.candidate) EXPECT_EQ(a.candidate->RawValue(x), b.candidate->RawValue(x));
    }
  }
  EXPECT_GE(count, 5);
}

TEST(ModelFileTest, ControlsWithParametersAndOverrides) {
  const ModelFile f = ParseModelFile(R"(
[dimensions]
N = 1
M = 1
[controls]
params = u, v
slow = -1, 0
fast = -2, 1
[dynamics]
f1 = u * x1
s1_1 = v * x1
s1_1@slow = 0.25
)");
  ASSERT_EQ(f.model.num_controls(), 2);
  EXPECT_EQ(f.model.controls()[1].label, "fast");
  const VectorXd x = VectorXd::Constant(1, 2.0);
  EXPECT_DOUBLE_EQ(f.model.Drift(x, 0)[0], -2.0);
  EXPECT_DOUBLE_EQ(f.model.Drift(x, 1)[0], -4.0);
  EXPECT_DOUBLE_EQ(f.model.Diffusion(x, 0)(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(f.model.Diffusion(x, 1)(0, 0), 2.0);
}

TEST(ModelFileTest, TruncatedExpressionReportsLineAndColumn) {
  const std::string text = "[dimensions]\nN = 1\nM = 1\n[dynamics]\nf1 = x1 +\n";
  const ModelFileError e = CaptureError([&] { ParseModelFile(text); });
  EXPECT_EQ(e.line(), 5);
  EXPECT_EQ(e.column(), 10);
  EXPECT_EQ(e.position(), text.find("x1 +") + 4);
}

TEST(ModelFileTest, UnknownSymbolIsAnError) {
  const ModelFileError e =
      CaptureError([] { ParseModelFile("[dimensions]\nN = 1\nM = 1\n[dynamics]\nf1 = -x2\n"); });
  EXPECT_EQ(e.line(), 5);
  EXPECT_EQ(e.column(), 7);
}

TEST(ModelFileTest, StructuralErrors) {
  CaptureError([] { ParseModelFile("[dynamics]\nf1 = 0\n"); });
  CaptureError([] { ParseModelFile("[dimensions]\nN = 1\nM = 1\n[dynamics]\nf2 = 0\n"); });
  CaptureError([] { ParseModelFile("[dimensions]\nN = 1\nM = 1\n[dynamics]\ns1_2 = 0\n"); });
  CaptureError([] { ParseModelFile("[dimensions]\nN = 1\nM = 1\n[bogus]\n"); });
  CaptureError([] { ParseModelFile("N = 1\n"); });
  CaptureError([] { ParseModelFile("[dimensions]\nN = 1\nM = 1\nN = 2\n[dynamics]\nf1 = 0\n"); });
  CaptureError([] {
    ParseModelFile("[dimensions]\nN = 1\nM = 1\n[dynamics]\nf1 = 0\n[domain]\nlower = 0\nupper = 0\n");
  });
  CaptureError([] {
    ParseModelFile("[dimensions]\nN = 2\nM = 1\n[dynamics]\nf1 = 0\nf2 = 0\n[domain]\nlower = -1\nupper = 1, 1\n");
  });
}

TEST(ModelFileTest, MissingDriftIsADimensionError) {
  EXPECT_THROW(ParseModelFile("[dimensions]\nN = 2\nM = 1\n[dynamics]\nf1 = -x1\n"), DimensionError);
}

TEST(ModelFileTest, TargetSection) {
  const ModelFile f = LoadModelFile(fs::path(ASCLF_MODELS_DIR) / "circle_target.model");
  ASSERT_TRUE(f.target.has_value());
  const std::vector<double> x = {2.0, 0.0};
  EXPECT_DOUBLE_EQ(f.target->distance.Evaluate(x), 1.0);
  EXPECT_DOUBLE_EQ(f.target->gamma1.Evaluate(std::vector<double>{0.5}), 0.5);
  EXPECT_DOUBLE_EQ(f.target->gamma2.Evaluate(std::vector<double>{0.5}), 0.125);
}

TEST(ModelFileTest, HashIsStable) {
  EXPECT_EQ(Fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(HexDigest(0xabcULL), "0000000000000abc");
}

}  // namespace
}  // namespace asclf
