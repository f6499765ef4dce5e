#ifndef PECL_TOKENIZERS_HPP
#define PECL_TOKENIZERS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "pecl/error.hpp"
#include "pecl/nn.hpp"
#include "pecl/tensor.hpp"

namespace pecl {

struct VisualTokenizerConfig {
  std::size_t frame_h = 16;
  std::size_t frame_w = 16;
  std::size_t frame_c = 1;
  std::size_t patch = 8;
  std::size_t inter_dim = 32;  // per-frame embedding width before projection

  std::size_t patches_per_frame() const {
    return (frame_h / patch) * (frame_w / patch);
  }
  std::size_t patch_dim() const { return patch * patch * frame_c; }

  void validate() const {
    if (patch == 0 || frame_h % patch != 0 || frame_w % patch != 0) {
      throw ConfigError("visual tokenizer: frame " + std::to_string(frame_h) +
                        "x" + std::to_string(frame_w) +
                        " not divisible by patch " + std::to_string(patch));
    }
    if (frame_c == 0 || inter_dim == 0) {
      throw ConfigError("visual tokenizer: zero channel or embedding width");
    }
  }
};

struct AudioTokenizerConfig {
  std::vector<std::size_t> channels = {8, 16, 32};
  std::vector<std::size_t> kernels = {10, 3, 3};
  std::vector<std::size_t> strides = {5, 2, 2};

  std::size_t inter_dim() const { return channels.back(); }

  void validate() const {
    if (channels.empty() || channels.size() != kernels.size() ||
        channels.size() != strides.size()) {
      throw ConfigError(
          "audio tokenizer: channels/kernels/strides must be equal-length and "
          "non-empty");
    }
    for (std::size_t s : strides)
      if (s == 0) throw ConfigError("audio tokenizer: zero stride");
    for (std::size_t k : kernels)
      if (k == 0) throw ConfigError("audio tokenizer: zero kernel");
  }
};

// Sample count a waveform must have so the conv stack lands exactly on L
// frames (no padding anywhere in the stack).
inline std::size_t audio_required_length(const AudioTokenizerConfig& cfg,
                                         std::size_t seq_len) {
  std::size_t l = seq_len;
  for (std::size_t i = cfg.channels.size(); i-- > 0;) {
    l = (l - 1) * cfg.strides[i] + cfg.kernels[i];
  }
  return l;
}

template <typename T>
struct VisualTokenizer {
  VisualTokenizerConfig cfg;
  Tensor<T> patch_w, patch_b;  // [patch_dim x inter], [inter]
  Tensor<T> proj_w, proj_b;    // [inter x D], [D]
};

template <typename T>
struct AudioTokenizer {
  AudioTokenizerConfig cfg;
  std::vector<Tensor<T>> conv_w, conv_b;  // conv_w[i]: [c_i x c_{i-1} x k_i]
  Tensor<T> proj_w, proj_b;               // [inter x D], [D]
};

// frames: [L x H x W x C] -> [(L*P) x (p*p*C)], one row per patch, patches in
// (frame, patch-row, patch-col) order, pixels row-major with channels last.
// Pure data prep: inputs never carry gradients.
template <typename T>
Tensor<T> patchify(const Tensor<T>& frames, const VisualTokenizerConfig& cfg) {
  const Shape& s = frames.shape();
  if (s.size() != 4 || s[1] != cfg.frame_h || s[2] != cfg.frame_w ||
      s[3] != cfg.frame_c) {
    throw ShapeError("patchify: frames " + shape_str(s) + " do not match " +
                     std::to_string(cfg.frame_h) + "x" +
                     std::to_string(cfg.frame_w) + "x" +
                     std::to_string(cfg.frame_c));
  }
  const std::size_t l = s[0], h = cfg.frame_h, w = cfg.frame_w, c = cfg.frame_c;
  const std::size_t p = cfg.patch;
  const std::size_t pr = h / p, pc = w / p;
  const std::size_t pd = cfg.patch_dim();
  std::vector<T> out(l * pr * pc * pd);
  const std::vector<T>& in = frames.data();
  std::size_t row = 0;
  for (std::size_t f = 0; f < l; ++f) {
    for (std::size_t br = 0; br < pr; ++br) {
      for (std::size_t bc = 0; bc < pc; ++bc) {
        T* dst = out.data() + row * pd;
        for (std::size_t y = 0; y < p; ++y) {
          for (std::size_t x = 0; x < p; ++x) {
            const std::size_t src =
                ((f * h + br * p + y) * w + bc * p + x) * c;
            for (std::size_t ch = 0; ch < c; ++ch)
              *dst++ = in[src + ch];
          }
        }
        ++row;
      }
    }
  }
  return Tensor<T>::from({l * pr * pc, pd}, std::move(out));
}

// Block-mean matrix [L x L*P]: row f averages the P patch embeddings of
// frame f. Constant, so per-frame pooling is a single matmul.
template <typename T>
Tensor<T> frame_pool_matrix(std::size_t l, std::size_t patches) {
  std::vector<T> m(l * l * patches, T(0));
  const T inv = T(1) / static_cast<T>(patches);
  for (std::size_t f = 0; f < l; ++f)
    for (std::size_t p = 0; p < patches; ++p)
      m[f * l * patches + f * patches + p] = inv;
  return Tensor<T>::from({l, l * patches}, std::move(m));
}

// frames: [L x H x W x C] -> tokens [L x D]. Patch embedding + mean pool per
// frame + linear projection; positional terms are the caller's business.
template <typename T>
Tensor<T> tokenize_visual(const VisualTokenizer<T>& tok,
                          const Tensor<T>& frames) {
  tok.cfg.validate();
  const std::size_t l = frames.dim(0);
  auto patches = patchify(frames, tok.cfg);
  auto embedded = add_rows(matmul(patches, tok.patch_w), tok.patch_b);
  auto pooled = matmul(frame_pool_matrix<T>(l, tok.cfg.patches_per_frame()),
                       embedded);  // [L x inter]
  return add_rows(matmul(pooled, tok.proj_w), tok.proj_b);
}

// wave: [T] or [1 x T] -> tokens [L x D] via the strided conv + gelu stack.
// The sample count must land the stack exactly on seq_len outputs.
template <typename T>
Tensor<T> tokenize_audio(const AudioTokenizer<T>& tok, const Tensor<T>& wave,
                         std::size_t seq_len) {
  tok.cfg.validate();
  const std::size_t want = audio_required_length(tok.cfg, seq_len);
  if (wave.size() != want) {
    throw ShapeError("tokenize_audio: waveform has " +
                     std::to_string(wave.size()) + " samples; the conv stack " +
                     "needs exactly " + std::to_string(want) + " for " +
                     std::to_string(seq_len) + " tokens");
  }
  auto h = wave.shape().size() == 2 ? wave : reshape(wave, {1, wave.size()});
  for (std::size_t i = 0; i < tok.cfg.channels.size(); ++i) {
    h = gelu(conv1d(h, tok.conv_w[i], tok.conv_b[i], tok.cfg.strides[i], 0));
  }
  // [C x L] -> [L x C] -> project to D.
  return add_rows(matmul(transpose(h), tok.proj_w), tok.proj_b);
}

}  // namespace pecl

#endif  // PECL_TOKENIZERS_HPP
