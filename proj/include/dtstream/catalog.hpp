#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace dtstream {

// Versions are numbered 1..L; version 0 means "nothing delivered".
// Segment indices are 0-based within a video.

struct CatalogSpec {
  std::size_t video_count = 450;
  std::size_t segments_per_video = 10;
  double segment_duration_s = 1.0;
  std::vector<double> version_bitrates_bps{1.0e6, 2.5e6, 5.0e6, 8.0e6};
  // Share of videos (by popularity rank) kept in the edge cache.
  double cache_fraction = 0.2;
  double popularity_exponent = 0.8;
  // Chance that a lower version of a cached segment is cached too.
  double lower_version_cache_probability = 0.3;

  void validate() const;
};

struct VideoMeta {
  std::size_t id = 0;
  std::size_t segment_count = 0;
  double segment_duration_s = 0.0;
  // Per segment, per version; flattened as [segment * L + (version - 1)].
  std::vector<double> size_bits;
  std::vector<double> psnr_db;
  std::vector<std::uint8_t> cached;
  // Per-segment coding complexity multiplier; empty for hand-built catalogs.
  std::vector<double> content_factor;
  double popularity_weight = 0.0;
};

// bitrate * e * content_factor. Rejects nonpositive inputs.
double segment_bits(double bitrate_bps, double duration_s, double content_factor);

class SegmentCatalog {
 public:
  // Validates every invariant: K_f >= 1, exactly L versions per segment,
  // strictly increasing sizes and PSNRs, positive durations.
  SegmentCatalog(std::vector<VideoMeta> videos, std::size_t version_count);

  std::size_t video_count() const { return videos_.size(); }
  std::size_t version_count() const { return versions_; }
  const VideoMeta& video(std::size_t f) const;

  std::size_t segment_count(std::size_t f) const { return video(f).segment_count; }
  double segment_duration(std::size_t f) const { return video(f).segment_duration_s; }

  double segment_size(std::size_t f, std::size_t k, int version) const;
  double psnr(std::size_t f, std::size_t k, int version) const;
  bool cached(std::size_t f, std::size_t k, int version) const;

  // Constraint (11c): some other cached version of (f, k) is at least as
  // large as the requested one, so the edge can transcode down to it.
  bool transcode_feasible(std::size_t f, std::size_t k, int version) const;

  double min_psnr() const { return min_psnr_; }
  double max_psnr() const { return max_psnr_; }
  double max_segment_size() const { return max_size_; }

  // Draws a video index from the popularity weights.
  std::size_t sample_video(std::mt19937_64& rng) const;

  void write_csv(std::ostream& os) const;

 private:
  std::size_t index(std::size_t f, std::size_t k, int version) const;

  std::vector<VideoMeta> videos_;
  std::size_t versions_ = 0;
  std::vector<double> popularity_cdf_;
  double min_psnr_ = 0.0;
  double max_psnr_ = 0.0;
  double max_size_ = 0.0;
};

// Deterministic for a fixed (spec, seed).
//
// Sizes follow bitrate * e * content_factor with the factor drawn per segment
// from [0.8, 1.2]. PSNR is base_f + 5 log2(bitrate_l / bitrate_1) + jitter,
// base_f in [34, 42] dB and per-segment jitter in [-1.5, 1.5] dB. The most
// popular videos under a Zipf law are cached at the top version, plus a random
// subset of lower versions.
SegmentCatalog build_catalog(const CatalogSpec& spec, std::uint64_t seed);

}  // namespace dtstream
