#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "stvig/decision.hpp"
#include "stvig/labeling.hpp"
#include "stvig/model.hpp"
#include "stvig/patch.hpp"

namespace stvig {

// --- frames ---------------------------------------------------------------

Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& im);

/// Packed raw-RGB8 container: 16-byte header of little-endian 32-bit fields
/// (magic "SVFR", width, height, frame count) followed by the frames.
inline constexpr std::uint32_t kRawVideoMagic = 0x52465653u;  // "SVFR"

class RawVideoWriter {
  public:
    RawVideoWriter(const std::string& path, int width, int height);
    ~RawVideoWriter();
    void append(const Image& im);
    void close();
    int frames_written() const { return count_; }

  private:
    std::ofstream out_;
    std::string path_;
    int width_, height_, count_ = 0;
};

class RawVideoReader {
  public:
    explicit RawVideoReader(const std::string& path);
    int frame_count() const { return count_; }
    int width() const { return width_; }
    int height() const { return height_; }
    Image frame(int index);

  private:
    std::ifstream in_;
    int width_ = 0, height_ = 0, count_ = 0;
};

// --- keypoint traces and annotations ---------------------------------------

/// One frame per line: frame index then 15 "x y c" triples in canonical
/// joint order; the header line carries frame rate and resolution.
void write_trace(const std::string& path, const SkeletonTrace& trace);
SkeletonTrace read_trace(const std::string& path);

void write_annotation(const std::string& path, const SeizureAnnotation& ann);
SeizureAnnotation read_annotation(const std::string& path);

// --- clip manifests ---------------------------------------------------------

void write_manifest(const std::string& path, const std::vector<LabeledClip>& clips);
std::vector<LabeledClip> read_manifest(const std::string& path);

// --- probability traces -----------------------------------------------------

void write_probability_trace(const std::string& path, const ProbabilityTrace& trace);
ProbabilityTrace read_probability_trace(const std::string& path);

// --- model configuration ------------------------------------------------------

/// Key/value text form of a ModelConfig; written next to trained weights so
/// inference tools can rebuild the exact architecture.
void write_model_config(const std::string& path, const ModelConfig& cfg);
ModelConfig read_model_config(const std::string& path);

// --- model weights ----------------------------------------------------------

inline constexpr std::uint32_t kWeightsMagic = 0x57475653u;  // "SVGW"
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, const std::vector<float>& v);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
void read_f32(std::istream& is, std::vector<float>& v, std::size_t n);

}  // namespace detail

/// magic, version, config fingerprint, tensor count, then per tensor: name
/// length, name bytes, rank, dims, raw little-endian float32 data.
template <typename S>
void save_weights(const std::string& path, const ModelWeights<S>& weights) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write weights file: " + path);
    detail::write_u32(os, kWeightsMagic);
    detail::write_u32(os, kWeightsVersion);
    detail::write_u64(os, weights.config.fingerprint());
    detail::write_u32(os, static_cast<std::uint32_t>(weights.tensors.size()));
    for (const auto& [name, t] : weights.tensors) {
        detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(os, static_cast<std::uint32_t>(t->rank()));
        for (auto d : t->shape()) detail::write_u32(os, static_cast<std::uint32_t>(d));
        std::vector<float> buf(t->data().begin(), t->data().end());
        detail::write_f32(os, buf);
    }
    if (!os) throw std::runtime_error("failed while writing weights file: " + path);
}

/// Loads into the layout implied by cfg; rejects fingerprint or shape
/// mismatches and unknown or missing tensors.
template <typename S>
ModelWeights<S> load_weights(const std::string& path, const ModelConfig& cfg) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open weights file: " + path);
    if (detail::read_u32(is) != kWeightsMagic)
        throw std::runtime_error("not a weights file: " + path);
    if (detail::read_u32(is) != kWeightsVersion)
        throw std::runtime_error("unsupported weights version in " + path);
    const std::uint64_t fp = detail::read_u64(is);
    if (fp != cfg.fingerprint())
        throw std::runtime_error("weights fingerprint mismatch: file was trained with a different model config");

    ModelWeights<S> w;
    w.config = cfg;
    const auto catalog = enumerate_layers(cfg);
    const std::uint32_t count = detail::read_u32(is);
    if (count != catalog.size())
        throw std::runtime_error("weights file holds " + std::to_string(count) + " tensors, expected " +
                                 std::to_string(catalog.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = detail::read_u32(is);
        Shape shape(rank);
        for (auto& d : shape) d = detail::read_u32(is);
        const auto& def = catalog[i];
        if (name != def.name || shape != def.shape)
            throw std::runtime_error("weights file tensor '" + name + "' does not match expected layer '" +
                                     def.name + "'");
        std::vector<float> buf;
        detail::read_f32(is, buf, static_cast<std::size_t>(numel(shape)));
        std::vector<S> data(buf.begin(), buf.end());
        w.index.emplace(name, w.tensors.size());
        w.tensors.emplace_back(name, Tensor<S>::make(shape, std::move(data), true));
    }
    if (!is) throw std::runtime_error("truncated weights file: " + path);
    return w;
}

}  // namespace stvig
