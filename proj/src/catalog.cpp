#include "dtstream/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

#include "dtstream/errors.hpp"

namespace dtstream {

void CatalogSpec::validate() const {
  if (video_count == 0) throw InvalidArgument("catalog: video count must be positive");
  if (segments_per_video == 0) throw InvalidArgument("catalog: segment count must be positive");
  if (!(segment_duration_s > 0.0)) throw InvalidArgument("catalog: segment duration must be positive");
  if (version_bitrates_bps.empty()) throw InvalidArgument("catalog: need at least one version");
  for (std::size_t l = 0; l < version_bitrates_bps.size(); ++l) {
    if (!(version_bitrates_bps[l] > 0.0)) throw InvalidArgument("catalog: bitrates must be positive");
    if (l > 0 && !(version_bitrates_bps[l] > version_bitrates_bps[l - 1])) {
      throw InvalidArgument("catalog: version bitrates must strictly increase");
    }
  }
  if (!(cache_fraction >= 0.0 && cache_fraction <= 1.0)) {
    throw InvalidArgument("catalog: cache fraction must lie in [0, 1]");
  }
  if (!(popularity_exponent >= 0.0)) throw InvalidArgument("catalog: popularity exponent must be >= 0");
  if (!(lower_version_cache_probability >= 0.0 && lower_version_cache_probability <= 1.0)) {
    throw InvalidArgument("catalog: lower-version cache probability must lie in [0, 1]");
  }
}

SegmentCatalog::SegmentCatalog(std::vector<VideoMeta> videos, std::size_t version_count)
    : videos_(std::move(videos)), versions_(version_count) {
  if (videos_.empty()) throw InvalidArgument("catalog: no videos");
  if (versions_ == 0) throw InvalidArgument("catalog: no versions");
  min_psnr_ = INFINITY;
  max_psnr_ = -INFINITY;
  double total_weight = 0.0;
  for (std::size_t f = 0; f < videos_.size(); ++f) {
    const VideoMeta& v = videos_[f];
    const std::size_t entries = v.segment_count * versions_;
    if (v.segment_count == 0) throw InvalidArgument("catalog: video without segments");
    if (!(v.segment_duration_s > 0.0)) throw InvalidArgument("catalog: segment duration must be positive");
    if (v.size_bits.size() != entries || v.psnr_db.size() != entries || v.cached.size() != entries) {
      throw InvalidArgument("catalog: video " + std::to_string(f) + " lacks exactly L versions per segment");
    }
    if (!(v.popularity_weight >= 0.0)) throw InvalidArgument("catalog: negative popularity weight");
    for (std::size_t k = 0; k < v.segment_count; ++k) {
      for (std::size_t l = 0; l < versions_; ++l) {
        const double size = v.size_bits[k * versions_ + l];
        const double psnr = v.psnr_db[k * versions_ + l];
        if (!(size > 0.0)) throw InvalidArgument("catalog: sizes must be positive");
        if (!(psnr > 0.0 && psnr < 100.0)) throw InvalidArgument("catalog: psnr outside (0, 100) dB");
        if (l > 0 && !(size > v.size_bits[k * versions_ + l - 1])) {
          throw InvalidArgument("catalog: sizes must strictly increase with version");
        }
        if (l > 0 && !(psnr > v.psnr_db[k * versions_ + l - 1])) {
          throw InvalidArgument("catalog: psnr must strictly increase with version");
        }
        min_psnr_ = std::min(min_psnr_, psnr);
        max_psnr_ = std::max(max_psnr_, psnr);
        max_size_ = std::max(max_size_, size);
      }
    }
    total_weight += v.popularity_weight;
  }
  popularity_cdf_.resize(videos_.size());
  double running = 0.0;
  for (std::size_t f = 0; f < videos_.size(); ++f) {
    running += total_weight > 0.0 ? videos_[f].popularity_weight / total_weight
                                  : 1.0 / static_cast<double>(videos_.size());
    popularity_cdf_[f] = running;
  }
  popularity_cdf_.back() = 1.0;
}

const VideoMeta& SegmentCatalog::video(std::size_t f) const {
  if (f >= videos_.size()) throw std::out_of_range("catalog: video index out of range");
  return videos_[f];
}

std::size_t SegmentCatalog::index(std::size_t f, std::size_t k, int version) const {
  const VideoMeta& v = video(f);
  if (k >= v.segment_count) throw std::out_of_range("catalog: segment index out of range");
  if (version < 1 || static_cast<std::size_t>(version) > versions_) {
    throw std::out_of_range("catalog: version out of range");
  }
  return k * versions_ + static_cast<std::size_t>(version - 1);
}

double SegmentCatalog::segment_size(std::size_t f, std::size_t k, int version) const {
  return videos_[f].size_bits[index(f, k, version)];
}

double SegmentCatalog::psnr(std::size_t f, std::size_t k, int version) const {
  return videos_[f].psnr_db[index(f, k, version)];
}

bool SegmentCatalog::cached(std::size_t f, std::size_t k, int version) const {
  return videos_[f].cached[index(f, k, version)] != 0;
}

bool SegmentCatalog::transcode_feasible(std::size_t f, std::size_t k, int version) const {
  const double wanted = segment_size(f, k, version);
  for (int other = 1; other <= static_cast<int>(versions_); ++other) {
    if (other == version) continue;
    if (cached(f, k, other) && segment_size(f, k, other) >= wanted) return true;
  }
  return false;
}

std::size_t SegmentCatalog::sample_video(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const auto it = std::upper_bound(popularity_cdf_.begin(), popularity_cdf_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - popularity_cdf_.begin()),
                               videos_.size() - 1);
}

void SegmentCatalog::write_csv(std::ostream& os) const {
  os << "video,segment,version,bits,psnr_db,cached\n";
  char line[160];
  for (std::size_t f = 0; f < videos_.size(); ++f) {
    for (std::size_t k = 0; k < videos_[f].segment_count; ++k) {
      for (int l = 1; l <= static_cast<int>(versions_); ++l) {
        std::snprintf(line, sizeof line, "%zu,%zu,%d,%.6f,%.6f,%d\n", f, k + 1, l,
                      segment_size(f, k, l), psnr(f, k, l), cached(f, k, l) ? 1 : 0);
        os << line;
      }
    }
  }
}

double segment_bits(double bitrate_bps, double duration_s, double content_factor) {
  if (!(bitrate_bps > 0.0) || !(duration_s > 0.0) || !(content_factor > 0.0)) {
    throw InvalidArgument("catalog: segment size needs positive bitrate, duration and factor");
  }
  return bitrate_bps * duration_s * content_factor;
}

SegmentCatalog build_catalog(const CatalogSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const std::size_t versions = spec.version_bitrates_bps.size();
  const double base_rate = spec.version_bitrates_bps.front();

  // Popularity rank of each video is a random permutation.
  std::vector<std::size_t> rank(spec.video_count);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::shuffle(rank.begin(), rank.end(), rng);

  const auto cached_videos = static_cast<std::size_t>(
      std::ceil(spec.cache_fraction * static_cast<double>(spec.video_count)));

  std::uniform_real_distribution<double> base_dist(34.0, 42.0);
  std::uniform_real_distribution<double> jitter_dist(-1.5, 1.5);
  std::uniform_real_distribution<double> factor_dist(0.8, 1.2);
  std::bernoulli_distribution lower_cached(spec.lower_version_cache_probability);

  std::vector<VideoMeta> videos(spec.video_count);
  for (std::size_t f = 0; f < spec.video_count; ++f) {
    VideoMeta& v = videos[f];
    v.id = f;
    v.segment_count = spec.segments_per_video;
    v.segment_duration_s = spec.segment_duration_s;
    v.popularity_weight =
        1.0 / std::pow(static_cast<double>(rank[f] + 1), spec.popularity_exponent);
    const bool in_cache = rank[f] < cached_videos;
    const std::size_t entries = v.segment_count * versions;
    v.size_bits.resize(entries);
    v.psnr_db.resize(entries);
    v.cached.assign(entries, 0);
    v.content_factor.resize(v.segment_count);
    const double base = base_dist(rng);
    for (std::size_t k = 0; k < v.segment_count; ++k) {
      const double factor = factor_dist(rng);
      const double jitter = jitter_dist(rng);
      v.content_factor[k] = factor;
      for (std::size_t l = 0; l < versions; ++l) {
        const double rate = spec.version_bitrates_bps[l];
        v.size_bits[k * versions + l] = segment_bits(rate, spec.segment_duration_s, factor);
        v.psnr_db[k * versions + l] = base + 5.0 * std::log2(rate / base_rate) + jitter;
      }
      if (in_cache) {
        v.cached[k * versions + versions - 1] = 1;
        for (std::size_t l = 0; l + 1 < versions; ++l) {
          v.cached[k * versions + l] = lower_cached(rng) ? 1 : 0;
        }
      }
    }
  }
  return SegmentCatalog(std::move(videos), versions);
}

}  // namespace dtstream
