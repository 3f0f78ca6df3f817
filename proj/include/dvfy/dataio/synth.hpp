#pragma once

#include <cstdint>
#include <vector>

#include "dvfy/dataio/dataset.hpp"

namespace dvfy::data {

/// Nuisance parameters of one latent domain.
struct DomainParams {
  Real amplitude = 1.0;     // signal gain before noise
  Real freq_offset = 0.0;   // added to every class frequency, cycles per window
  Real ar_coef = 0.0;       // AR(1) noise coefficient
  Real noise_std = 0.3;     // AR(1) innovation standard deviation
  std::vector<Real> mixing; // channels x channels orthogonal matrix, row-major
  std::vector<Real> offset; // per-channel constant level (sensor orientation / baseline)

  bool operator==(const DomainParams&) const = default;
};

struct SynthConfig {
  int domains = 3;
  int classes = 4;
  std::size_t channels = 3;
  std::size_t series_per_cell = 20;
  std::size_t length = 256;
  std::size_t window = 64;
  std::size_t step = 32;
  Real offset_scale = 4.0;  // magnitude of the per-domain channel offset
  bool normalize = true;
  NormScope scope = NormScope::kSample;
  std::uint64_t seed = 1;
  // Derived from the seed when empty.
  std::vector<DomainParams> domain_params;

  bool operator==(const SynthConfig&) const = default;
};

/// Throws kConfig naming the offending field.
void validate(const SynthConfig& cfg);

/// Spreads AR colour, gain and frequency offset evenly across domains, with a
/// random orthogonal channel mixing and a channel offset of norm offset_scale
/// per domain; offsets point along distinct axes of a shared random basis.
std::vector<DomainParams> default_domain_params(const SynthConfig& cfg);

/// One series per (domain, class, replicate), ordered domain-major. Class sets
/// the base frequency of a multichannel sinusoid; the domain sets gain,
/// frequency offset, channel mixing, channel offset and AR(1) noise colour. Every series draws
/// from its own sub-seed, so output is independent of generation order.
std::vector<RawSeries> generate_series(const SynthConfig& cfg);

/// generate_series, windowed and (optionally) min-max normalized per segment.
SegmentDataset generate_synthetic(const SynthConfig& cfg);

}  // namespace dvfy::data
