#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "dvfy/dataio/dataset.hpp"
#include "dvfy/dataio/io.hpp"
#include "dvfy/dataio/synth.hpp"
#include "dvfy/error.hpp"
#include "dvfy/numerics/rng.hpp"

namespace {

using namespace dvfy::data;
using dvfy::Error;
using dvfy::ErrorKind;

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kInput;
}

RawSeries ramp_series(std::size_t length, std::size_t channels = 1) {
  RawSeries s;
  s.id = "r";
  s.channels = channels;
  s.class_label = 1;
  s.true_domain = 2;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < length; ++t) s.samples.push_back(static_cast<double>(t) + 1000.0 * c);
  return s;
}

SegmentDataset small_dataset(std::uint64_t seed, std::size_t n = 12) {
  dvfy::Rng rng(seed);
  SegmentDataset ds(2, 5, 3);
  for (std::size_t i = 0; i < n; ++i) {
    Segment s;
    s.id = "s" + std::to_string(i);
    s.y = static_cast<int>(i % 3);
    s.true_domain = static_cast<int>(i % 2);
    for (int v = 0; v < 10; ++v) s.values.push_back(rng.normal() * 1e3);
    ds.add(s);
  }
  return ds;
}

TEST(Segment, CountAndCoverage) {
  const auto segs = segment(ramp_series(200), 50, 25);
  ASSERT_EQ(segs.size(), 7u);
  EXPECT_EQ(segs[0].values.front(), 0.0);
  EXPECT_EQ(segs[6].values.front(), 150.0);
  EXPECT_EQ(segs[6].values.back(), 199.0);
  EXPECT_EQ(segs[3].id, "r#3");
  EXPECT_EQ(segs[3].y, 1);
  EXPECT_EQ(segs[3].true_domain, 2);
}

TEST(Segment, WindowEqualToLengthGivesOne) { EXPECT_EQ(segment(ramp_series(50), 50, 25).size(), 1u); }

TEST(Segment, WindowLongerThanSeriesIsInputError) {
  EXPECT_EQ(kind_of([] { segment(ramp_series(49), 50, 25); }), ErrorKind::kInput);
}

TEST(Segment, ChannelMajorLayout) {
  const auto segs = segment(ramp_series(10, 2), 4, 2);
  ASSERT_EQ(segs[1].values.size(), 8u);
  EXPECT_EQ(segs[1].values[0], 2.0);
  EXPECT_EQ(segs[1].values[4], 1002.0);
}

TEST(Normalize, SampleScopeMapsToUnitRange) {
  std::vector<double> v{2, 4, 6, 10};
  minmax_normalize(v, 2);
  EXPECT_EQ(v, (std::vector<double>{0, 0.25, 0.5, 1}));
}

TEST(Normalize, ChannelScopeIsPerChannel) {
  std::vector<double> v{2, 4, 6, 10};
  minmax_normalize(v, 2, NormScope::kChannel);
  EXPECT_EQ(v, (std::vector<double>{0, 1, 0, 1}));
}

TEST(Normalize, ConstantInputMapsToZero) {
  std::vector<double> v{3, 3, 3};
  minmax_normalize(v, 1);
  EXPECT_EQ(v, (std::vector<double>{0, 0, 0}));
}

TEST(Dataset, RejectsBadShapeAndLabel) {
  SegmentDataset ds(2, 3, 2);
  Segment s{"a", std::vector<double>(5, 0.0), 0, -1, 0};
  EXPECT_EQ(kind_of([&] { ds.add(s); }), ErrorKind::kShape);
  s.values.resize(6);
  s.y = 2;
  EXPECT_EQ(kind_of([&] { ds.add(s); }), ErrorKind::kInput);
}

TEST(Dataset, BatchLayout) {
  auto ds = small_dataset(1);
  std::vector<std::size_t> idx{3, 0};
  auto b = ds.batch(idx);
  EXPECT_EQ(b.shape(), (dvfy::nn::Shape{2, 2, 1, 5}));
  EXPECT_EQ(b.data()[0], ds[3].values[0]);
  EXPECT_EQ(b.data()[10], ds[0].values[0]);
}

TEST(Dataset, LatentDomainResetAndBounds) {
  auto ds = small_dataset(2);
  ds.set_latent_domains(3);
  ds.set_pseudo_domain(1, 2);
  EXPECT_EQ(ds.pseudo_domains()[1], 2);
  EXPECT_THROW(ds.set_pseudo_domain(1, 3), Error);
  ds.set_latent_domains(2);
  for (int d : ds.pseudo_domains()) EXPECT_EQ(d, 0);
}

TEST(Split, StratifiedEightTwo) {
  SegmentDataset ds(1, 2, 2);
  for (int i = 0; i < 50; ++i) ds.add(Segment{"x" + std::to_string(i), {0.0, 1.0}, i < 30 ? 0 : 1, -1, 0});
  const auto split = split_train_val(ds, 0.8, 9);
  EXPECT_EQ(split.train.size(), 40u);
  EXPECT_EQ(split.val.size(), 10u);
  int val0 = 0;
  for (auto i : split.val) val0 += ds[i].y == 0;
  EXPECT_EQ(val0, 6);
  std::set<std::size_t> all(split.train.begin(), split.train.end());
  all.insert(split.val.begin(), split.val.end());
  EXPECT_EQ(all.size(), 50u);
  EXPECT_TRUE(std::is_sorted(split.train.begin(), split.train.end()));
  EXPECT_EQ(split_train_val(ds, 0.8, 9).val, split.val);
  EXPECT_NE(split_train_val(ds, 0.8, 10).val, split.val);
}

TEST(Split, ClassWithOneSegmentIsInputError) {
  SegmentDataset ds(1, 1, 2);
  ds.add(Segment{"a", {0.0}, 0, -1, 0});
  ds.add(Segment{"b", {0.0}, 0, -1, 0});
  ds.add(Segment{"c", {0.0}, 1, -1, 0});
  EXPECT_EQ(kind_of([&] { split_train_val(ds, 0.8, 1); }), ErrorKind::kInput);
}

TEST(Io, TextRoundTripIsExact) {
  auto ds = small_dataset(3);
  std::stringstream ss;
  write_dataset(ss, ds);
  EXPECT_EQ(read_dataset(ss), ds);
}

TEST(Io, BinaryRoundTripIsExactForFloat32Values) {
  auto ds = small_dataset(4);
  std::stringstream first;
  write_dataset(first, ds, DatasetEncoding::kBinary);
  const auto narrowed = read_dataset(first);
  std::stringstream second;
  write_dataset(second, narrowed, DatasetEncoding::kBinary);
  EXPECT_EQ(read_dataset(second), narrowed);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t v = 0; v < ds[i].values.size(); ++v)
      EXPECT_EQ(narrowed[i].values[v], static_cast<double>(static_cast<float>(ds[i].values[v])));
}

TEST(Io, FileRoundTrip) {
  auto ds = small_dataset(5);
  const auto path = std::filesystem::temp_directory_path() / "dvfy_dataio_test.dvts";
  save_dataset(path, ds);
  EXPECT_EQ(load_dataset(path), ds);
  std::filesystem::remove(path);
}

TEST(Io, MissingTrueDomainStaysAbsent) {
  SegmentDataset ds(1, 2, 2);
  ds.add(Segment{"a", {0.5, 1.5}, 1, -1, 0});
  std::stringstream ss;
  write_dataset(ss, ds);
  auto back = read_dataset(ss);
  EXPECT_FALSE(back.has_true_domains());
}

TEST(Io, MalformedInputNamesTheLine) {
  std::stringstream ss("DVTS1 channels=1 window=2 classes=2\na,0,-1,0.5,1.5\nb,7,-1,0.5,1.5\n");
  try {
    read_dataset(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Io, WrongValueCountAndEmptyFile) {
  std::stringstream bad("DVTS1 channels=1 window=2 classes=2\na,0,-1,0.5\n");
  EXPECT_EQ(kind_of([&] { read_dataset(bad); }), ErrorKind::kParse);
  std::stringstream empty;
  EXPECT_EQ(kind_of([&] { read_dataset(empty); }), ErrorKind::kParse);
}

TEST(Synth, DeterministicAndShaped) {
  SynthConfig cfg;
  const auto a = generate_synthetic(cfg);
  EXPECT_EQ(a.size(), 3u * 4u * 20u * 7u);
  EXPECT_EQ(a.channels(), 3u);
  EXPECT_EQ(a.window(), 64u);
  EXPECT_EQ(a.classes(), 4);
  EXPECT_EQ(generate_synthetic(cfg), a);
  cfg.seed = 2;
  EXPECT_NE(generate_synthetic(cfg), a);
}

TEST(Synth, NormalizedToUnitRange) {
  const auto ds = generate_synthetic(SynthConfig{});
  for (const auto& s : ds.segments()) {
    EXPECT_EQ(*std::min_element(s.values.begin(), s.values.end()), 0.0);
    EXPECT_EQ(*std::max_element(s.values.begin(), s.values.end()), 1.0);
  }
}

TEST(Synth, SeriesIndependentOfDomainCount) {
  SynthConfig a;
  SynthConfig b;
  b.domain_params = default_domain_params(a);
  b.domain_params.pop_back();
  b.domains = 2;
  const auto sa = generate_series(a);
  const auto sb = generate_series(b);
  for (std::size_t i = 0; i < sb.size(); ++i) EXPECT_EQ(sa[i], sb[i]);
}

TEST(Synth, RejectsSingleDomain) {
  SynthConfig cfg;
  cfg.domains = 1;
  try {
    validate(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("data.domains"), std::string::npos);
  }
}

TEST(Synth, DomainOffsetsAreDistinctAndScaled) {
  SynthConfig cfg;
  cfg.offset_scale = 2.5;
  const auto p = default_domain_params(cfg);
  for (const auto& d : p) {
    double n = 0;
    for (double v : d.offset) n += v * v;
    EXPECT_NEAR(std::sqrt(n), 2.5, 1e-12);
  }
  double dot = 0;
  for (std::size_t j = 0; j < 3; ++j) dot += p[0].offset[j] * p[1].offset[j];
  EXPECT_NEAR(dot, 0.0, 1e-12);
}

}  // namespace
