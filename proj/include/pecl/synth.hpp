#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pecl/datakit.hpp"
#include "pecl/error.hpp"
#include "pecl/model.hpp"
#include "pecl/rng.hpp"
#include "pecl/tokenizers.hpp"

namespace pecl {

// Exact population totals for manifests that must mirror a reference corpus.
// clips == 0 leaves the generator in free round-robin mode.
struct SynthCounts {
  std::size_t clips = 0;
  std::size_t subjects = 0;
  std::size_t male_subjects = 0;
  std::size_t deceptive = 0;
};

struct SynthSpec {
  std::string mode = "xor";  // "xor" or "aligned"
  std::size_t n_clips = 200;
  std::size_t n_subjects = 0;  // 0 picks roughly one subject per 8 clips
  double noise = 0.25;
  double flip_rate = 0.1;
  std::size_t seq_len = 16;
  VisualTokenizerConfig visual;
  AudioTokenizerConfig audio;
  FeatureAlphabet alphabet = FeatureAlphabet::standard();
  SynthCounts counts;
  bool render_media = true;  // latent-only runs skip the heavy buffers

  void validate() const {
    if (mode != "xor" && mode != "aligned")
      throw ConfigError("synth: mode must be xor or aligned, got '" + mode +
                        "'");
    if (seq_len == 0) throw ConfigError("synth: seq_len must be positive");
    if (noise < 0.0) throw ConfigError("synth: noise must be nonnegative");
    if (flip_rate < 0.0 || flip_rate > 1.0)
      throw ConfigError("synth: flip_rate must lie in [0, 1]");
    if (alphabet.size() == 0) throw ConfigError("synth: empty feature alphabet");
    visual.validate();
    audio.validate();
    if (counts.clips > 0) {
      if (counts.subjects == 0)
        throw ConfigError("synth: exact counts need subjects > 0");
      if (counts.male_subjects > counts.subjects)
        throw ConfigError("synth: male subjects exceed subject total");
      if (counts.deceptive > counts.clips)
        throw ConfigError("synth: deceptive count exceeds clip total");
    }
  }

  std::size_t clip_total() const {
    return counts.clips > 0 ? counts.clips : n_clips;
  }
};

struct SynthClip {
  ClipRecord record;
  int z_v = -1;  // latents are generator state, never serialized
  int z_a = -1;
  std::vector<float> frames;  // seq_len * H * W * C
  std::vector<float> wave;
};

namespace detail {

inline std::string padded_id(const char* prefix, std::size_t i,
                             std::size_t total) {
  std::size_t width = 1;
  for (std::size_t t = total; t >= 10; t /= 10) ++width;
  std::string digits = std::to_string(i);
  return std::string(prefix) +
         std::string(width > digits.size() ? width - digits.size() : 0, '0') +
         digits;
}

// Cycle spans both duration buckets, the unassigned gap, and the long tail.
inline constexpr double kDurationCycle[] = {2.0, 3.5, 4.0,  4.7, 5.0,
                                            8.0, 10.0, 13.0, 19.0};

inline void render_visual(std::vector<float>& frames, const SynthSpec& spec,
                          int z_v, Rng& rng) {
  const std::size_t h = spec.visual.frame_h, w = spec.visual.frame_w,
                    c = spec.visual.frame_c;
  frames.resize(spec.seq_len * h * w * c);
  const std::size_t band_h = h >= 4 ? h / 4 : 1;
  const std::size_t band_w = w >= 4 ? w / 4 : 1;
  std::size_t idx = 0;
  for (std::size_t l = 0; l < spec.seq_len; ++l)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        // Latent 0 shows horizontal bands, latent 1 vertical ones.
        const std::size_t band = z_v ? x / band_w : y / band_h;
        const double base = (band % 2 == 0) ? 0.5 : -0.5;
        for (std::size_t ch = 0; ch < c; ++ch)
          frames[idx++] = static_cast<float>(
              base + spec.noise * rng.normal());
      }
}

inline void render_audio(std::vector<float>& wave, const SynthSpec& spec,
                         int z_a, Rng& rng) {
  const std::size_t n = audio_required_length(spec.audio, spec.seq_len);
  wave.resize(n);
  const double cycles = z_a ? 9.0 : 3.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double phase =
        2.0 * 3.14159265358979323846 * cycles * static_cast<double>(t) /
        static_cast<double>(n);
    wave[t] =
        static_cast<float>(0.5 * std::sin(phase) + spec.noise * rng.normal());
  }
}

}  // namespace detail

// Latent bits drive everything: the visual pattern follows z_v, the tone
// follows z_a, the label is their xor (or both equal it in aligned mode),
// and each annotation is a flip_rate-noisy copy of one latent. Per-clip RNG
// streams keep every clip independent of generation order.
inline std::vector<SynthClip> synth_generate(const SynthSpec& spec,
                                             std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.clip_total();
  if (n == 0) throw ConfigError("synth: need at least one clip");
  const bool exact = spec.counts.clips > 0;
  const std::size_t n_subjects =
      exact ? spec.counts.subjects
            : (spec.n_subjects ? spec.n_subjects
                               : std::max<std::size_t>(6, n / 8));
  const std::size_t males =
      exact ? spec.counts.male_subjects : (n_subjects + 1) / 2;

  const std::uint64_t base = derive_seed(seed, "synth");

  std::vector<int> forced_labels;
  if (exact) {
    forced_labels.assign(n, 0);
    for (std::size_t i = 0; i < spec.counts.deceptive; ++i) forced_labels[i] = 1;
    Rng shuffle_rng(derive_seed(base, "labels"));
    for (std::size_t i = n; i > 1; --i) {
      auto j = static_cast<std::size_t>(
          shuffle_rng.uniform(0.0, static_cast<double>(i)));
      if (j >= i) j = i - 1;
      std::swap(forced_labels[i - 1], forced_labels[j]);
    }
  }

  const auto names = spec.alphabet.all();
  std::vector<SynthClip> clips;
  clips.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(base, "clip", i));
    SynthClip c;
    int label;
    if (spec.mode == "xor") {
      c.z_v = rng.uniform(0.0, 1.0) < 0.5;
      if (exact) {
        label = forced_labels[i];
        c.z_a = c.z_v ^ label;
      } else {
        c.z_a = rng.uniform(0.0, 1.0) < 0.5;
        label = c.z_v ^ c.z_a;
      }
    } else {
      label = exact ? forced_labels[i] : (rng.uniform(0.0, 1.0) < 0.5);
      c.z_v = label;
      c.z_a = label;
    }

    c.record.clip_id = detail::padded_id("c", i, n);
    const std::size_t subject = i % n_subjects;
    c.record.subject_id = detail::padded_id("s", subject, n_subjects);
    c.record.gender = subject < males ? Gender::male : Gender::female;
    c.record.duration_s =
        detail::kDurationCycle[i % (sizeof(detail::kDurationCycle) /
                                    sizeof(double))];
    c.record.label = label;
    for (std::size_t f = 0; f < names.size(); ++f) {
      const int src = (f % 2 == 0) ? c.z_v : c.z_a;
      const bool flip = rng.uniform(0.0, 1.0) < spec.flip_rate;
      c.record.annotations[names[f]] = flip ? 1 - src : src;
    }

    if (spec.render_media) {
      detail::render_visual(c.frames, spec, c.z_v, rng);
      detail::render_audio(c.wave, spec, c.z_a, rng);
    }
    clips.push_back(std::move(c));
  }
  return clips;
}

template <typename T>
Example<T> to_example(const SynthClip& c, const SynthSpec& spec,
                      std::size_t aux_count) {
  if (c.frames.empty() || c.wave.empty())
    throw ValueError("synth: clip '" + c.record.clip_id + "' carries no media");
  Example<T> e;
  std::vector<T> fv(c.frames.begin(), c.frames.end());
  e.frames = Tensor<T>::from({spec.seq_len, spec.visual.frame_h,
                              spec.visual.frame_w, spec.visual.frame_c},
                             std::move(fv));
  std::vector<T> wv(c.wave.begin(), c.wave.end());
  e.wave = Tensor<T>::from({c.wave.size()}, std::move(wv));
  e.label = c.record.label;
  e.aux = aux_targets(c.record, spec.alphabet, aux_count);
  return e;
}

struct SynthDataset {
  std::vector<SynthClip> clips;
  std::vector<std::size_t> frames_shape;  // {L, H, W, C}
  std::size_t wave_len = 0;
};

namespace detail {

inline void write_floats(const std::string& path,
                         const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("synth: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}

inline std::vector<float> read_floats(const std::string& path,
                                      std::size_t expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("synth: cannot open '" + path + "'");
  std::vector<float> data(expect);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(expect * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != expect * sizeof(float))
    throw ValueError("synth: '" + path + "' holds fewer than " +
                     std::to_string(expect) + " values");
  char probe;
  if (in.read(&probe, 1))
    throw ValueError("synth: '" + path + "' holds more than " +
                     std::to_string(expect) + " values");
  return data;
}

}  // namespace detail

// Layout: <dir>/manifest.jsonl, <dir>/media.json, <dir>/media/<id>.{v,a}.bin.
// Media are raw little-endian f32 in row-major order; the sidecar pins the
// shapes shared by every clip.
inline void write_dataset(const std::string& dir,
                          const std::vector<SynthClip>& clips,
                          const SynthSpec& spec) {
  if (clips.empty()) throw ValueError("synth: nothing to write");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "media");

  std::vector<ClipRecord> records;
  records.reserve(clips.size());
  for (const auto& c : clips) records.push_back(c.record);
  save_manifest((fs::path(dir) / "manifest.jsonl").string(), records);

  const std::size_t wave_len = audio_required_length(spec.audio, spec.seq_len);
  Json side;
  side["dtype"] = "f32";
  side["frames_shape"] = {spec.seq_len, spec.visual.frame_h,
                          spec.visual.frame_w, spec.visual.frame_c};
  side["wave_shape"] = {wave_len};
  {
    std::ofstream out((fs::path(dir) / "media.json").string(),
                      std::ios::binary);
    if (!out) throw ConfigError("synth: cannot write media sidecar");
    out << side.dump(2) << "\n";
  }

  const std::size_t frame_count = spec.seq_len * spec.visual.frame_h *
                                  spec.visual.frame_w * spec.visual.frame_c;
  for (const auto& c : clips) {
    if (c.frames.size() != frame_count || c.wave.size() != wave_len)
      throw ShapeError("synth: clip '" + c.record.clip_id +
                       "' media do not match the spec shapes");
    const auto stem = (fs::path(dir) / "media" / c.record.clip_id).string();
    detail::write_floats(stem + ".v.bin", c.frames);
    detail::write_floats(stem + ".a.bin", c.wave);
  }
}

inline SynthDataset load_dataset(const std::string& dir,
                                 const FeatureAlphabet& alphabet) {
  namespace fs = std::filesystem;
  auto records =
      load_manifest((fs::path(dir) / "manifest.jsonl").string(), alphabet);

  std::ifstream in((fs::path(dir) / "media.json").string());
  if (!in) throw ConfigError("synth: cannot open media sidecar in '" + dir + "'");
  Json side = Json::parse(in, nullptr, false);
  if (side.is_discarded() || !side.contains("frames_shape") ||
      !side.contains("wave_shape") || side["frames_shape"].size() != 4)
    throw ValueError("synth: malformed media sidecar in '" + dir + "'");

  SynthDataset ds;
  ds.frames_shape = side["frames_shape"].get<std::vector<std::size_t>>();
  ds.wave_len = side["wave_shape"][0].get<std::size_t>();
  std::size_t frame_count = 1;
  for (std::size_t d : ds.frames_shape) frame_count *= d;

  for (auto& r : records) {
    SynthClip c;
    const auto stem = (fs::path(dir) / "media" / r.clip_id).string();
    c.frames = detail::read_floats(stem + ".v.bin", frame_count);
    c.wave = detail::read_floats(stem + ".a.bin", ds.wave_len);
    c.record = std::move(r);
    ds.clips.push_back(std::move(c));
  }
  return ds;
}

// Dataset-level conversion used by training; shapes come from the sidecar.
template <typename T>
std::vector<Example<T>> dataset_examples(const SynthDataset& ds,
                                         const FeatureAlphabet& alphabet,
                                         std::size_t aux_count) {
  std::vector<Example<T>> out;
  out.reserve(ds.clips.size());
  for (const auto& c : ds.clips) {
    Example<T> e;
    std::vector<T> fv(c.frames.begin(), c.frames.end());
    e.frames = Tensor<T>::from({ds.frames_shape[0], ds.frames_shape[1],
                                ds.frames_shape[2], ds.frames_shape[3]},
                               std::move(fv));
    std::vector<T> wv(c.wave.begin(), c.wave.end());
    e.wave = Tensor<T>::from({c.wave.size()}, std::move(wv));
    e.label = c.record.label;
    e.aux = aux_targets(c.record, alphabet, aux_count);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace pecl
