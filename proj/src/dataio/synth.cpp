#include "dvfy/dataio/synth.hpp"

#include <cmath>
#include <numbers>

#include "dvfy/error.hpp"
#include "dvfy/numerics/rng.hpp"

namespace dvfy::data {

namespace {

// Gram-Schmidt on a Gaussian matrix; rows come out orthonormal.
std::vector<Real> random_orthogonal(std::size_t n, Rng& rng) {
  std::vector<Real> q(n * n);
  for (auto& v : q) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    Real* row = &q[i * n];
    for (std::size_t j = 0; j < i; ++j) {
      const Real* prev = &q[j * n];
      Real dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += row[k] * prev[k];
      for (std::size_t k = 0; k < n; ++k) row[k] -= dot * prev[k];
    }
    Real norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += row[k] * row[k];
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < n; ++k) row[k] /= norm;
  }
  return q;
}

Real class_frequency(int c) { return 2.0 + 1.5 * static_cast<Real>(c); }

}  // namespace

void validate(const SynthConfig& cfg) {
  require(cfg.domains >= 2, ErrorKind::kConfig, "data.domains must be at least 2");
  require(cfg.classes >= 2, ErrorKind::kConfig, "data.classes must be at least 2");
  require(cfg.channels >= 1, ErrorKind::kConfig, "data.channels must be positive");
  require(cfg.series_per_cell >= 1, ErrorKind::kConfig, "data.series_per_cell must be positive");
  require(cfg.window >= 1 && cfg.window <= cfg.length, ErrorKind::kConfig, "data.window must be in [1, data.length]");
  require(cfg.step >= 1, ErrorKind::kConfig, "data.step must be positive");
  require(cfg.offset_scale >= 0.0, ErrorKind::kConfig, "data.offset_scale must be non-negative");
  if (!cfg.domain_params.empty()) {
    require(cfg.domain_params.size() == static_cast<std::size_t>(cfg.domains), ErrorKind::kConfig,
            "domain parameter count must equal data.domains");
    for (const auto& p : cfg.domain_params) {
      require(p.mixing.size() == cfg.channels * cfg.channels, ErrorKind::kConfig, "mixing must be channels x channels");
      require(p.offset.empty() || p.offset.size() == cfg.channels, ErrorKind::kConfig,
              "offset must have one entry per channel");
      require(std::abs(p.ar_coef) < 1.0, ErrorKind::kConfig, "AR coefficient must lie in (-1,1)");
    }
  }
}

std::vector<DomainParams> default_domain_params(const SynthConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "domains"));
  std::vector<DomainParams> out;
  const Real span = static_cast<Real>(cfg.domains - 1);
  const std::size_t ch = cfg.channels;
  const std::vector<Real> axes = random_orthogonal(ch, rng);
  for (int d = 0; d < cfg.domains; ++d) {
    const Real u = static_cast<Real>(d) / span;  // 0 .. 1 across domains
    DomainParams p;
    p.ar_coef = -0.6 + 1.5 * u + rng.uniform(-0.05, 0.05);
    p.amplitude = 1.0 + 0.6 * std::sin(std::numbers::pi * u) + rng.uniform(-0.05, 0.05);
    p.freq_offset = -0.4 + 0.8 * u + rng.uniform(-0.05, 0.05);
    p.noise_std = 0.3;
    p.mixing = random_orthogonal(ch, rng);
    // Axis d, sign flipped on every wrap past the channel count.
    const std::size_t axis = static_cast<std::size_t>(d) % ch;
    const Real sign = (static_cast<std::size_t>(d) / ch) % 2 == 0 ? 1.0 : -1.0;
    p.offset.resize(ch);
    for (std::size_t j = 0; j < ch; ++j) p.offset[j] = sign * cfg.offset_scale * axes[axis * ch + j];
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<RawSeries> generate_series(const SynthConfig& cfg) {
  validate(cfg);
  const auto params = cfg.domain_params.empty() ? default_domain_params(cfg) : cfg.domain_params;
  const std::size_t ch = cfg.channels, len = cfg.length;
  const Real two_pi = 2.0 * std::numbers::pi;

  std::vector<RawSeries> out;
  std::uint64_t index = 0;
  std::vector<Real> base(ch * len);
  for (int d = 0; d < cfg.domains; ++d) {
    const DomainParams& p = params[static_cast<std::size_t>(d)];
    for (int c = 0; c < cfg.classes; ++c) {
      for (std::size_t r = 0; r < cfg.series_per_cell; ++r, ++index) {
        Rng rng(derive_seed(cfg.seed, index));
        RawSeries s;
        s.id = "d" + std::to_string(d) + "c" + std::to_string(c) + "s" + std::to_string(r);
        s.channels = ch;
        s.class_label = c;
        s.true_domain = d;
        s.samples.assign(ch * len, 0.0);

        const Real freq = (class_frequency(c) + p.freq_offset) * (1.0 + rng.uniform(-0.03, 0.03));
        const Real phase = rng.uniform(0.0, two_pi);
        for (std::size_t j = 0; j < ch; ++j) {
          const Real channel_phase = phase + two_pi * static_cast<Real>(j) / static_cast<Real>(ch);
          for (std::size_t t = 0; t < len; ++t) {
            const Real arg = two_pi * freq * static_cast<Real>(t) / static_cast<Real>(cfg.window) + channel_phase;
            base[j * len + t] = std::sin(arg);
          }
        }
        const Real jitter = 1.0 + rng.uniform(-0.1, 0.1);
        for (std::size_t i = 0; i < ch; ++i) {
          const Real level = p.offset.empty() ? 0.0 : jitter * p.offset[i];
          Real noise = rng.normal() * p.noise_std / std::sqrt(1.0 - p.ar_coef * p.ar_coef);
          for (std::size_t t = 0; t < len; ++t) {
            Real mixed = 0.0;
            for (std::size_t j = 0; j < ch; ++j) mixed += p.mixing[i * ch + j] * base[j * len + t];
            noise = p.ar_coef * noise + p.noise_std * rng.normal();
            s.samples[i * len + t] = p.amplitude * mixed + noise + level;
          }
        }
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

SegmentDataset generate_synthetic(const SynthConfig& cfg) {
  const auto series = generate_series(cfg);
  SegmentDataset ds(cfg.channels, cfg.window, cfg.classes);
  for (const auto& s : series) {
    for (auto& seg : segment(s, cfg.window, cfg.step)) {
      if (cfg.normalize) minmax_normalize(seg.values, cfg.channels, cfg.scope);
      ds.add(std::move(seg));
    }
  }
  return ds;
}

}  // namespace dvfy::data
