#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "dtstream/catalog.hpp"
#include "dtstream/delay.hpp"
#include "dtstream/errors.hpp"
#include "dtstream/playback.hpp"
#include "dtstream/pqoe.hpp"
#include "dtstream/radio.hpp"

using namespace dtstream;

namespace {

// One video, one segment, four versions of 1, 2, 3, 4 Mbit; `cached` marks
// which versions sit in the edge cache.
SegmentCatalog one_segment(std::vector<std::uint8_t> cached) {
  VideoMeta v;
  v.segment_count = 1;
  v.segment_duration_s = 1.0;
  v.size_bits = {1e6, 2e6, 3e6, 4e6};
  v.psnr_db = {30, 34, 37, 40};
  v.cached = std::move(cached);
  v.popularity_weight = 1.0;
  return SegmentCatalog({v}, 4);
}

DeliveryDecision decide(int version, bool transcode, double omega, double xi) {
  DeliveryDecision d;
  d.version = version;
  d.transcode = transcode;
  d.compute_share = omega;
  d.bandwidth_share = xi;
  return d;
}

}  // namespace

TEST_CASE("catalog shape") {
  CatalogSpec spec;
  const SegmentCatalog cat = build_catalog(spec, 3);
  CHECK(cat.video_count() == 450);
  CHECK(cat.version_count() == 4);
  for (std::size_t f = 0; f < cat.video_count(); ++f) {
    REQUIRE(cat.segment_count(f) == 10);
    for (std::size_t k = 0; k < 10; ++k) {
      for (int l = 1; l < 4; ++l) {
        CHECK(cat.segment_size(f, k, l) < cat.segment_size(f, k, l + 1));
        CHECK(cat.psnr(f, k, l) < cat.psnr(f, k, l + 1));
      }
      CHECK(cat.psnr(f, k, 1) > 0.0);
      CHECK(cat.psnr(f, k, 4) < 100.0);
    }
  }

  CatalogSpec tiny;
  tiny.video_count = 1;
  tiny.segments_per_video = 1;
  const SegmentCatalog small = build_catalog(tiny, 1);
  CHECK(small.segment_count(0) == 1);
  CHECK(small.video(0).size_bits.size() == 4);
}

TEST_CASE("catalog is deterministic per seed") {
  CatalogSpec spec;
  std::ostringstream a;
  std::ostringstream b;
  std::ostringstream c;
  build_catalog(spec, 9).write_csv(a);
  build_catalog(spec, 9).write_csv(b);
  build_catalog(spec, 10).write_csv(c);
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
}

TEST_CASE("segment bits") {
  CHECK(segment_bits(2.5e6, 1.0, 1.0) == 2.5e6);
  CHECK_THROWS_AS(segment_bits(2.5e6, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(segment_bits(0.0, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("catalog rejects broken invariants") {
  VideoMeta v;
  v.segment_count = 1;
  v.segment_duration_s = 1.0;
  v.size_bits = {1e6, 3e6, 2e6, 4e6};
  v.psnr_db = {30, 34, 37, 40};
  v.cached = {0, 0, 0, 0};
  v.popularity_weight = 1.0;
  CHECK_THROWS_AS(SegmentCatalog({v}, 4), InvalidArgument);
  v.size_bits = {1e6, 2e6, 3e6};
  CHECK_THROWS_AS(SegmentCatalog({v}, 4), InvalidArgument);
}

TEST_CASE("transcode feasibility") {
  CHECK(one_segment({0, 0, 0, 1}).transcode_feasible(0, 0, 2));
  CHECK_FALSE(one_segment({0, 0, 0, 0}).transcode_feasible(0, 0, 2));
  CHECK_FALSE(one_segment({0, 1, 0, 0}).transcode_feasible(0, 0, 4));
  CHECK(one_segment({0, 1, 0, 0}).transcode_feasible(0, 0, 1));
}

TEST_CASE("pathloss and snr") {
  CHECK(pathloss_db(1000.0) == doctest::Approx(128.1));
  CHECK(pathloss_db(100.0) == doctest::Approx(90.5));
  ChannelModel ch;
  ch.antenna_gain_db = 0.0;
  CHECK(received_snr(ch, 100.0) == doctest::Approx(std::pow(10.0, 1.65)));
  CHECK(received_snr(ch, 100.0) == doctest::Approx(44.7).epsilon(1e-3));
  CHECK_THROWS_AS(received_snr(ch, 0.0), InvalidArgument);
  CHECK_THROWS_AS(received_snr(ch, 601.0), InvalidArgument);
}

TEST_CASE("radio rate") {
  ChannelModel ch;
  CHECK(tx_rate(ch, 0.0, 15.0) == 0.0);
  CHECK(tx_rate(ch, 0.5, 15.0) == 4e8);
  CHECK(tx_rate(ch, 1.0, 0.0) == 0.0);
}

TEST_CASE("transcode time") {
  ComputeModel cm;
  CHECK(transcode_time(cm, 2e6, 0.5) == doctest::Approx(0.04));
  CHECK(transcode_time(cm, 0.0, 0.5) == 0.0);
  CHECK(transcode_time(cm, 2e6, 1.0) == doctest::Approx(0.02));
  CHECK_THROWS_AS(transcode_time(cm, 2e6, 0.0), InfeasibleAllocation);
}

TEST_CASE("delivery cases and delays") {
  // r_bs = xi W log2(1 + snr) = 0.1 * 2e8 * 1 = 2e7 bps with snr = 1.
  ChannelModel ch;
  ComputeModel cm;
  const double snr = 1.0;

  const SegmentCatalog hit = one_segment({0, 1, 0, 0});
  DelayBreakdown d = service_delay(hit, ch, cm, decide(2, false, 0.0, 0.1), snr);
  CHECK(d.delivery == DeliveryCase::kEdgeHit);
  CHECK(d.total_s == doctest::Approx(0.1));

  const SegmentCatalog above = one_segment({0, 0, 0, 1});
  d = service_delay(above, ch, cm, decide(2, true, 0.5, 0.1), snr);
  CHECK(d.delivery == DeliveryCase::kEdgeTranscode);
  CHECK(d.transcode_s == doctest::Approx(0.04));
  CHECK(d.total_s == doctest::Approx(0.14));

  d = service_delay(above, ch, cm, decide(2, false, 0.0, 0.1), snr);
  CHECK(d.delivery == DeliveryCase::kCloud);
  CHECK(d.backhaul_s == doctest::Approx(0.01));
  CHECK(d.total_s == doctest::Approx(0.11));

  // Infeasible transcode requests fall back to the cloud.
  const SegmentCatalog none = one_segment({0, 0, 0, 0});
  CHECK(classify_delivery(none, decide(2, true, 0.5, 0.1)) == DeliveryCase::kCloud);
  CHECK(classify_delivery(none, decide(0, false, 0.0, 0.0)) == DeliveryCase::kNone);
  CHECK(service_delay(none, ch, cm, decide(0, false, 0.0, 0.0), snr).total_s == 0.0);
  CHECK_THROWS_AS(service_delay(hit, ch, cm, decide(2, false, 0.0, 0.0), snr), InfeasibleAllocation);
  CHECK_THROWS_AS(service_delay(above, ch, cm, decide(2, true, 0.0, 0.1), snr),
                  InfeasibleAllocation);
}

TEST_CASE("buffer and rebuffering") {
  CHECK(update_buffer(3.0, true, 1.0, 0.1) == doctest::Approx(3.9));
  CHECK(update_buffer(0.0, false, 1.0, 0.1) == 0.0);
  CHECK(update_buffer(0.05, false, 1.0, 0.1) == 0.0);
  CHECK(rebuffer_time(0.5, 0.2) == doctest::Approx(0.3));
  CHECK(rebuffer_time(0.1, 3.0) == 0.0);
  CHECK(rebuffer_time(0.7, 0.7) == 0.0);

  const SegmentCatalog cat = one_segment({0, 1, 0, 0});
  CHECK(segment_quality(cat, decide(4, false, 0.0, 0.1)) == 40.0);
  CHECK(segment_quality(cat, decide(0, false, 0.0, 0.0)) == 0.0);
  CHECK(quality_variation(1, 4) == 3);
  CHECK(quality_variation(3, 3) == 0);
  CHECK(quality_variation(2, 0) == 0);
  CHECK(quality_variation(0, 3) == 0);
}

TEST_CASE("departure model") {
  DepartureModel calm{0.0, 0.0, 0.0, 0.05, 0.0, 60.0};
  CHECK(departure_probability(calm, 0.0, 60.0, 0) == 0.0);
  DepartureModel stall{0.0, 1.0, 0.0, 0.0, 0.0, 60.0};
  CHECK(departure_probability(stall, 2.0, 30.0, 0) == 1.0);

  DepartureModel mid;
  std::mt19937_64 a(4);
  std::mt19937_64 b(4);
  for (int i = 0; i < 200; ++i) {
    CHECK(maybe_depart(mid, 0.5, 35.0, 1, a) == maybe_depart(mid, 0.5, 35.0, 1, b));
  }
}

TEST_CASE("pqoe score") {
  const PqoeParams p{50.0, 1.0, 0.5, 1.0};
  CHECK(memory_factor(50.0, 10.0, 10.0) == 1.0);
  CHECK(pqoe_score(p, {40.0, 2.0, 0.3, 10.0, 10.0}) == doctest::Approx(38.7));
  CHECK(memory_factor(1e9, 0.0, 100.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(memory_factor(50.0, 0.0, 50.0) == doctest::Approx(std::exp(-1.0)));

  CHECK(reference_score(10.0, 10, 1.0, 0.0) == 5.0);
  CHECK(reference_score(5.0, 10, 1.0, 0.0) == 2.5);
  CHECK(reference_score(8.0, 10, 1.0, 2.0) == doctest::Approx(10.0 / 3.0));

  const SlotFactors end{40.0, 2.0, 0.3, 10.0, 10.0};
  const std::vector<SlotFactors> one{end};
  const std::vector<SlotFactors> two{end, end};
  const std::vector<SlotFactors> zero{SlotFactors{0, 0, 0, 3, 10}};
  CHECK(accumulate_session(p, one) == pqoe_score(p, end));
  CHECK(accumulate_session(p, two) == 2.0 * pqoe_score(p, end));
  CHECK(accumulate_session(p, zero) == 0.0);
}

TEST_CASE("normalized pqoe") {
  NormalizedPqoe n = normalize_pqoe({{10.0}, {5.0}});
  CHECK(n.values[0][0] == 1.0);
  CHECK(n.values[1][0] == 0.5);
  CHECK(normalize_pqoe({{7.0}}).values[0][0] == 1.0);
  n = normalize_pqoe({{3.0}, {3.0}});
  CHECK(n.values[0][0] == 1.0);
  CHECK(n.values[1][0] == 1.0);
  n = normalize_pqoe({{-1.0, 4.0}, {-2.0, -4.0}});
  CHECK(n.degenerate_user[0]);
  CHECK(n.values[0][0] == 0.0);
  CHECK(n.values[1][1] == 0.0);
}
