#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/common.hpp"

namespace lc {

// grayscale page, row-major, intensities in [0,1], 1 = white background
struct DocumentImage {
  int width = 0, height = 0;
  std::vector<float> pixels;

  float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
};

// 0 = non-text, k >= 1 = text pixel of the k-th line (top-down)
struct LineMap {
  int width = 0, height = 0;
  std::vector<int32_t> labels;

  int32_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
  int32_t& at(int x, int y) { return labels[static_cast<size_t>(y) * width + x]; }
  int max_label() const;
};

// real-valued counting target; ground truth defined only where mask is set
struct LineCountMap {
  int width = 0, height = 0;
  std::vector<float> values;
  std::vector<uint8_t> mask;
};

LineCountMap linecount_from_linemap(const LineMap& m);

// rewrites positive labels to contiguous 1..K preserving order; returns K
int renumber_labels(LineMap& m);

struct SynthSpec {
  int page_h = 192, page_w = 128;
  int lines_min = 3, lines_max = 8;
  int glyph_h_min = 8, glyph_h_max = 14;
  int gap_min = 2, gap_max = 10;  // may be <= 0 to force touching lines
  double skew_deg = 1.5;          // per-line skew drawn from [-skew_deg, skew_deg]
  double curve_amp = 1.5;         // sine amplitude drawn from [0, curve_amp] pixels

  void validate() const;
  std::string to_json() const;
  static SynthSpec from_json(const std::string& json_text);
};

// procedural page of word-like stroke clusters; pure function of (spec, seed)
std::pair<DocumentImage, LineMap> synth_page(const SynthSpec& spec, uint64_t seed);

enum class WarpKind { perspective, thin_plate_spline };

// random warp; image sampled bilinear, labels nearest so they stay integers
std::pair<DocumentImage, LineMap> augment(const DocumentImage& img, const LineMap& map,
                                          WarpKind kind, double magnitude, uint64_t seed);

struct ScaleRecord {
  double scale = 1.0;
  int orig_w = 0, orig_h = 0;
  int content_w = 0, content_h = 0;  // size before padding
};

// aspect-preserving resize then white/zero padding at bottom/right
ScaleRecord resize_pad(const DocumentImage& in, DocumentImage& out, int target_h, int target_w);
void resize_pad_linemap(const LineMap& in, LineMap& out, const ScaleRecord& rec, int target_h,
                        int target_w);
// nearest-neighbor transport of labels back to the original resolution
LineMap unresize_linemap(const LineMap& resized, const ScaleRecord& rec);

// PGM P5: 8-bit for images, 16-bit (big-endian, maxval 65535) for line maps
void write_pgm8(const std::string& path, const DocumentImage& img);
DocumentImage read_pgm8(const std::string& path);
void write_pgm16(const std::string& path, const LineMap& map);
LineMap read_pgm16(const std::string& path);

// color-coded label visualization, PPM P6; label k -> palette[k mod 12]
extern const uint8_t kLabelPalette[12][3];
void write_label_ppm(const std::string& path, const LineMap& map);

struct ManifestEntry {
  std::string image_path, linemap_path;
};

// JSON list of {image_path, linemap_path}; relative paths resolve against
// the manifest's directory
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

struct Sample {
  DocumentImage image;
  LineMap gt;
};

// reads every page of a manifest; checks image/linemap extents match
std::vector<Sample> load_dataset(const std::string& manifest_path);

}  // namespace lc
